"""Command-line interface: ``huberfdr <subcommand> ...``."""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .distribution import HuberParams, sample
from .mcmc import chain_diagnostics, posterior_summary, run_chain
from .mle import (
    delta_method_intervals,
    fit_mle,
    lrt_common_k,
    parametric_bootstrap,
)
from .policy import DEFAULT_POLICY
from .regression import fit_huber_lm
from .report import build_report, calls_to_csv, call_nonnull, render_svg, series_to_csv

DEFAULTS = {
    "B": 1000,
    "iters": 20000,
    "burnin": 5000,
    "threshold": DEFAULT_POLICY.call_threshold,
    "k_max": DEFAULT_POLICY.k_max,
    "level": 0.95,
    "seed": 0,
    "seed_env": "HUBERFDR_SEED",
}


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(DEFAULTS["seed_env"])
    if env is not None and env.strip():
        value = int(env)
        if value < 0:
            raise ValueError(f"{DEFAULTS['seed_env']} must be a non-negative integer")
        return value
    return DEFAULTS["seed"]


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def _params(text):
    try:
        mu, sigma, ka, kb = (hio.parse_number(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected MU,SIGMA,KA,KB") from None
    return mu, sigma, ka, kb


def _policy(args):
    k_max = getattr(args, "k_max", None)
    return DEFAULT_POLICY if k_max is None else DEFAULT_POLICY.with_(k_max=k_max)


def _emit(args, text):
    if args.output:
        hio.atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _fit_text(label, fit):
    p = fit.params
    lines = [f"dataset: {label}", f"n: {fit.n}", f"symmetric: {fit.symmetric}"]
    for name, value in (("mu0", p.mu0), ("sigma0", p.sigma0), ("ka", p.ka), ("kb", p.kb),
                        ("p0", fit.p0)):
        se = "" if fit.se is None else f"  (se {fit.se[name]:.4g})"
        lines.append(f"{name}: {value:.6g}{se}")
    lines += [f"loglik: {fit.loglik:.10g}", f"converged: {fit.converged}",
              f"boundary_ka: {fit.boundary_ka}", f"boundary_kb: {fit.boundary_kb}"]
    return "\n".join(lines) + "\n"


def _document(args, kind, label, payload, text=None):
    doc = hio.ResultDocument(kind=kind, label=label, payload=payload)
    if getattr(args, "format", "json") == "text" and text is not None:
        return text
    return doc.to_json()


def cmd_fit(args):
    data = hio.read_zdata(args.input)
    fit = fit_mle(data, policy=_policy(args), symmetric=args.symmetric)
    _emit(args, _document(args, "fit", data.label, {"fit": fit.to_dict()},
                          _fit_text(data.label, fit)))


def cmd_fdr(args):
    data = hio.read_zdata(args.input)
    policy = _policy(args)
    if args.params is None:
        params = fit_mle(data, policy=policy).params
    else:
        params = HuberParams(*args.params, k_max=policy.k_max)
    _emit(args, calls_to_csv(call_nonnull(data, params, args.threshold)))


def cmd_lrt(args):
    data = hio.read_zdata(args.input)
    res = lrt_common_k(data, policy=_policy(args))
    text = (f"dataset: {data.label}\nstatistic: {res.statistic:.6g}\n"
            f"p_value: {res.p_value:.6g}\nboundary_caveat: {res.boundary_caveat}\n")
    _emit(args, _document(args, "lrt", data.label, {"lrt": res.to_dict()}, text))


def cmd_boot(args):
    data = hio.read_zdata(args.input)
    policy = _policy(args)
    fit = fit_mle(data, policy=policy)
    seed = _resolve_seed(args.seed)
    boot = parametric_bootstrap(fit, data, B=args.B, seed=seed, level=args.level,
                                n_jobs=args.jobs, policy=policy)
    payload = {"fit": fit.to_dict(), "intervals": boot.to_dict(), "seed": seed}
    _emit(args, _document(args, "boot", data.label, payload))


def cmd_bayes(args):
    data = hio.read_zdata(args.input)
    policy = _policy(args)
    seed = _resolve_seed(args.seed)
    chain = run_chain(data, iters=args.iters, burnin=args.burnin, seed=seed, policy=policy)
    payload = {
        "summary": posterior_summary(chain, level=args.level),
        "diagnostics": chain_diagnostics(chain),
        "level": args.level,
        "iters": args.iters,
        "burnin": args.burnin,
        "seed": seed,
        "acceptance_rate": chain.acceptance_rate,
        "acceptance_warning": chain.acceptance_warning,
    }
    if args.chain_csv:
        lines = ["iter,mu0,sigma0,ka,kb,p0"]
        for i, row in enumerate(chain.draws):
            lines.append(",".join([str(args.burnin + i)] + [repr(float(v)) for v in row]))
        hio.atomic_write_text(args.chain_csv, "\n".join(lines) + "\n")
    _emit(args, _document(args, "bayes", data.label, payload))


def cmd_simulate(args):
    policy = _policy(args)
    params = HuberParams(args.mu, args.sigma, args.ka, args.kb, k_max=policy.k_max)
    seed = _resolve_seed(args.seed)
    data = sample(args.n, params, seed)
    header = (f"# simulated from H(mu0={args.mu!r}, sigma0={args.sigma!r}, ka={args.ka!r}, "
              f"kb={args.kb!r}), n={args.n}, seed={seed}\n")
    hio.atomic_write_text(args.output, header + hio.format_values(data.values))


def cmd_regress(args):
    data = hio.read_regression_csv(args.input, args.response, intercept=not args.no_intercept)
    fit = fit_huber_lm(data, policy=_policy(args))
    _emit(args, _document(args, "regress", Path(args.input).stem, {"regression": fit.to_dict()}))


def cmd_report(args):
    data = hio.read_zdata(args.input)
    policy = _policy(args)
    fit = fit_mle(data, policy=policy)
    report = build_report(data, fit.params, bins=args.bins, threshold=args.threshold)
    files = {f"{name}.csv": series_to_csv(s) for name, s in report.items() if name != "calls"}
    files["calls.csv"] = calls_to_csv(report["calls"])
    files["fit.json"] = hio.ResultDocument("fit", data.label, {"fit": fit.to_dict()}).to_json()
    if args.svg:
        files["report.svg"] = render_svg(report, title=data.label)
    out = args.output or f"{data.label}_report"
    hio.atomic_write_files(out, files)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="huberfdr",
        description="Fit the asymmetric Huber distribution to z-values and derive local fdr.",
    )
    parser.add_argument("--defaults", action="store_true",
                        help="print numeric defaults as JSON and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, output=True, fmt=False):
        p.add_argument("--k-max", type=float, default=None, dest="k_max",
                       help=f"knot boundary (default {DEFAULTS['k_max']})")
        if output:
            p.add_argument("-o", "--output", default=None)
        if fmt:
            p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("fit", help="maximum-likelihood fit")
    p.add_argument("input")
    p.add_argument("--symmetric", action="store_true")
    common(p, fmt=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fdr", help="local fdr and non-null calls")
    p.add_argument("input")
    p.add_argument("--params", type=_params, default=None, metavar="MU,SIGMA,KA,KB")
    p.add_argument("--threshold", type=float, default=DEFAULTS["threshold"])
    common(p)
    p.set_defaults(func=cmd_fdr)

    p = sub.add_parser("lrt", help="likelihood-ratio test for a common knot")
    p.add_argument("input")
    common(p, fmt=True)
    p.set_defaults(func=cmd_lrt)

    p = sub.add_parser("boot", help="parametric bootstrap intervals")
    p.add_argument("input")
    p.add_argument("-B", type=int, default=DEFAULTS["B"])
    p.add_argument("--seed", type=_non_negative_int, default=None)
    p.add_argument("--level", type=float, default=DEFAULTS["level"])
    p.add_argument("--jobs", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_boot)

    p = sub.add_parser("bayes", help="random-walk Metropolis posterior")
    p.add_argument("input")
    p.add_argument("--iters", type=int, default=DEFAULTS["iters"])
    p.add_argument("--burnin", type=int, default=DEFAULTS["burnin"])
    p.add_argument("--seed", type=_non_negative_int, default=None)
    p.add_argument("--level", type=float, default=DEFAULTS["level"])
    p.add_argument("--chain-csv", default=None, dest="chain_csv")
    common(p)
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("simulate", help="draw z-values from H(mu, sigma, ka, kb)")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--ka", type=float, required=True)
    p.add_argument("--kb", type=float, required=True)
    p.add_argument("--seed", type=_non_negative_int, default=None)
    p.add_argument("--k-max", type=float, default=None, dest="k_max")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("regress", help="linear regression with Huber errors")
    p.add_argument("input")
    p.add_argument("--response", required=True)
    p.add_argument("--no-intercept", action="store_true", dest="no_intercept")
    common(p)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("report", help="CSV plot series, calls and optional SVG")
    p.add_argument("input")
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--threshold", type=float, default=DEFAULTS["threshold"])
    p.add_argument("--svg", action="store_true")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.defaults:
        sys.stdout.write(json.dumps(DEFAULTS, indent=2, sort_keys=True) + "\n")
        return 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        with np.errstate(all="ignore"):
            args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        sys.stderr.write(json.dumps(hio.error_document(exc), indent=2, sort_keys=True) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
