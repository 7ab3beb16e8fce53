"""Maximum-likelihood fitting of the asymmetric Huber distribution.

The estimator maximises the exact likelihood over (mu0, log sigma0, log ka,
log kb) with a Nelder-Mead simplex.  Its estimating equations for mu0 and
sigma0 are close to, but not identical with, Huber's classical simultaneous
location/scale M-estimator; no Huber-type reweighting is used here.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .data import ZData, as_zdata
from .distribution import (
    LOG_SQRT_2PI,
    HuberParams,
    _rho,
    log_density,
    null_proportion,
)
from .policy import DEFAULT_POLICY

PARAM_NAMES = ("mu0", "sigma0", "ka", "kb")


class FitError(RuntimeError):
    """Base class for fitting failures; ``diagnostics`` holds the details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(FitError):
    pass


class InsufficientDataError(ValueError):
    pass


class BoundaryError(FitError):
    """An interval method that needs an interior optimum met a boundary fit."""


class InformationError(FitError):
    """The observed information matrix is not positive definite."""

    def __init__(self, message, eigenvalues):
        super().__init__(message, {"eigenvalues": [float(v) for v in eigenvalues]})
        self.eigenvalues = np.asarray(eigenvalues)


@dataclass(frozen=True)
class FitResult:
    params: HuberParams
    symmetric: bool
    loglik: float
    p0: float
    converged: bool
    boundary_ka: bool
    boundary_kb: bool
    se: dict = None
    n_restarts_used: int = 0
    n: int = 0
    nfev: int = 0

    @property
    def at_boundary(self):
        return self.boundary_ka or self.boundary_kb

    def to_dict(self):
        return {
            "mu0": self.params.mu0,
            "sigma0": self.params.sigma0,
            "ka": self.params.ka,
            "kb": self.params.kb,
            "k_max": self.params.k_max,
            "p0": self.p0,
            "loglik": self.loglik,
            "symmetric": self.symmetric,
            "converged": self.converged,
            "boundary_ka": self.boundary_ka,
            "boundary_kb": self.boundary_kb,
            "se": None if self.se is None else dict(self.se),
            "n_restarts_used": self.n_restarts_used,
            "n": self.n,
            "nfev": self.nfev,
        }

    @classmethod
    def from_dict(cls, d):
        params = HuberParams(d["mu0"], d["sigma0"], d["ka"], d["kb"], d["k_max"])
        return cls(
            params=params,
            symmetric=d["symmetric"],
            loglik=d["loglik"],
            p0=d["p0"],
            converged=d["converged"],
            boundary_ka=d["boundary_ka"],
            boundary_kb=d["boundary_kb"],
            se=None if d["se"] is None else dict(d["se"]),
            n_restarts_used=d["n_restarts_used"],
            n=d["n"],
            nfev=d["nfev"],
        )


@dataclass(frozen=True)
class LrtResult:
    loglik_free: float
    loglik_common: float
    statistic: float
    p_value: float
    boundary_caveat: bool = False

    def to_dict(self):
        return {
            "loglik_free": self.loglik_free,
            "loglik_common": self.loglik_common,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "boundary_caveat": self.boundary_caveat,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class IntervalSet:
    """Point estimates with two-sided intervals at a common level."""

    method: str
    level: float
    estimates: dict
    intervals: dict
    se: dict = None
    n_replicates: int = 0
    n_failures: int = 0
    unreliable: bool = False
    replicates: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "method": self.method,
            "level": self.level,
            "estimates": dict(self.estimates),
            "intervals": {k: list(v) for k, v in self.intervals.items()},
            "se": None if self.se is None else dict(self.se),
            "n_replicates": self.n_replicates,
            "n_failures": self.n_failures,
            "unreliable": self.unreliable,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["intervals"] = {k: tuple(v) for k, v in d["intervals"].items()}
        return cls(**d)


def neg_log_lik(p, data):
    """Negative log-likelihood of ``data`` under ``p``."""
    z = as_zdata(data).values
    return -float(np.sum(log_density(z, p)))


def _nll(z, mu, sigma, ka, kb, k_max):
    ka_e = math.inf if ka >= k_max else ka
    kb_e = math.inf if kb >= k_max else kb
    u = (z - mu) / sigma
    head = math.log(null_proportion(ka_e, kb_e)) - math.log(sigma) - LOG_SQRT_2PI
    return -z.size * head + float(np.sum(_rho(u, ka_e, kb_e)))


class _Objective:
    """nll over unconstrained coordinates, with some knots possibly fixed."""

    def __init__(self, z, policy, symmetric, fixed=None):
        self.z = z
        self.policy = policy
        self.symmetric = symmetric
        self.fixed = dict(fixed or {})
        self.nfev = 0

    def free_names(self):
        names = ["mu0", "log_sigma0"]
        if self.symmetric:
            if "k" not in self.fixed:
                names.append("log_k")
        else:
            names += [f"log_{k}" for k in ("ka", "kb") if k not in self.fixed]
        return names

    def unpack(self, x):
        it = iter(x)
        mu = next(it)
        sigma = math.exp(next(it))
        k_max = self.policy.k_max
        if self.symmetric:
            k = self.fixed["k"] if "k" in self.fixed else min(math.exp(next(it)), k_max)
            return mu, sigma, k, k
        ka = self.fixed["ka"] if "ka" in self.fixed else min(math.exp(next(it)), k_max)
        kb = self.fixed["kb"] if "kb" in self.fixed else min(math.exp(next(it)), k_max)
        return mu, sigma, ka, kb

    def pack(self, mu, sigma, ka, kb):
        x = [mu, math.log(sigma)]
        if self.symmetric:
            if "k" not in self.fixed:
                x.append(math.log(ka))
        else:
            x += [math.log(v) for name, v in (("ka", ka), ("kb", kb)) if name not in self.fixed]
        return np.array(x)

    def bounds(self):
        lo, hi = math.log(self.policy.k_min), math.log(self.policy.k_max)
        return [(None, None), (None, None)] + [(lo, hi)] * (len(self.free_names()) - 2)

    def steps(self, sigma):
        return np.array([0.1 * sigma, 0.1] + [0.2] * (len(self.free_names()) - 2))

    def __call__(self, x):
        self.nfev += 1
        mu, sigma, ka, kb = self.unpack(x)
        val = _nll(self.z, mu, sigma, ka, kb, self.policy.k_max)
        return val if math.isfinite(val) else math.inf


def _initial_simplex(x0, steps, bounds):
    sim = [np.array(x0, dtype=float)]
    for i, h in enumerate(steps):
        v = np.array(x0, dtype=float)
        lo, hi = bounds[i]
        # step inward if the vertex would leave the box
        if hi is not None and v[i] + h > hi:
            v[i] -= h
        else:
            v[i] += h
        if lo is not None:
            v[i] = max(v[i], lo)
        sim.append(v)
    return np.array(sim)


def _minimise(obj, x0, sigma_scale, policy):
    """Nelder-Mead with restarts from the previous solution."""
    bounds = obj.bounds()
    opts = dict(fatol=policy.fatol, xatol=policy.xatol, maxiter=policy.maxiter,
                maxfev=policy.maxiter * 2)

    def run(start):
        sim = _initial_simplex(start, obj.steps(sigma_scale), bounds)
        return optimize.minimize(obj, start, method="Nelder-Mead", bounds=bounds,
                                 options=dict(opts, initial_simplex=sim))

    best = run(np.asarray(x0, dtype=float))
    restarts = 0
    stable = False
    while restarts < policy.max_restarts:
        res = run(best.x)
        restarts += 1
        gain = best.fun - res.fun
        if res.fun <= best.fun:
            best = res
        if res.success and gain <= max(1e-7, 1e-12 * abs(res.fun)):
            stable = True
            break
    return best, restarts, stable and bool(best.success)


def _robust_start(z):
    mu = float(np.median(z))
    mad = float(np.median(np.abs(z - mu))) * 1.4826
    if not mad > 0:
        mad = float(np.std(z)) or 1.0
    return mu, mad


def fit_mle(data, policy=DEFAULT_POLICY, symmetric=False, start=None, compute_se=True):
    """Maximum-likelihood fit of all four parameters.

    Parameters
    ----------
    data : ZData or array_like
        z-values, at least ``policy.min_n`` of them.
    policy : NumericPolicy
        Tolerances, knot bounds and restart budget.
    symmetric : bool
        Constrain ``ka == kb``.
    start : HuberParams, optional
        Starting point. Defaults to median, 1.4826 * MAD and knots of 1.5.
    compute_se : bool
        Attach standard errors from the observed information when the
        optimum is interior.

    Returns
    -------
    FitResult

    Raises
    ------
    InsufficientDataError
        Fewer than ``policy.min_n`` observations.
    ConvergenceError
        The simplex did not settle after all restarts.
    """
    data = as_zdata(data)
    z = data.values
    if data.n < policy.min_n:
        raise InsufficientDataError(
            f"need at least {policy.min_n} z-values for a four-parameter fit, got {data.n}"
        )
    if start is None:
        mu, sigma = _robust_start(z)
        ka = kb = 1.5
    else:
        mu, sigma, ka, kb = start.as_tuple()
        if symmetric:
            ka = kb = math.sqrt(ka * kb)
    ka, kb = (min(max(k, policy.k_min), policy.k_max) for k in (ka, kb))

    fixed = {}
    total_restarts = 0
    nfev = 0
    for _ in range(3):
        obj = _Objective(z, policy, symmetric, fixed)
        res, restarts, converged = _minimise(obj, obj.pack(mu, sigma, ka, kb), sigma, policy)
        total_restarts += restarts
        nfev += obj.nfev
        if not converged:
            raise ConvergenceError(
                "Nelder-Mead did not converge after restarts",
                {"message": res.message, "nit": int(res.nit), "nfev": nfev,
                 "x": [float(v) for v in res.x], "fun": float(res.fun),
                 "restarts": total_restarts},
            )
        mu, sigma, ka, kb = obj.unpack(res.x)
        # with no data beyond a knot the likelihood increases monotonically
        # in that knot, so the constrained optimum sits at k_max exactly
        newly = _empty_tails(z, mu, sigma, ka, kb, policy, symmetric, fixed)
        if not newly:
            break
        fixed.update(newly)
        ka = fixed.get("ka", fixed.get("k", ka))
        kb = fixed.get("kb", fixed.get("k", kb))

    params = HuberParams(mu, sigma, ka, kb, policy.k_max)
    loglik = -_nll(z, mu, sigma, ka, kb, policy.k_max)
    boundary_ka = ka >= policy.k_max - policy.boundary_tol
    boundary_kb = kb >= policy.k_max - policy.boundary_tol
    se = None
    if compute_se and not (boundary_ka or boundary_kb):
        try:
            se = _standard_errors(params, z, symmetric)
        except InformationError:
            se = None
    return FitResult(
        params=params,
        symmetric=symmetric,
        loglik=loglik,
        p0=params.p0,
        converged=True,
        boundary_ka=bool(boundary_ka),
        boundary_kb=bool(boundary_kb),
        se=se,
        n_restarts_used=total_restarts,
        n=data.n,
        nfev=nfev,
    )


def _empty_tails(z, mu, sigma, ka, kb, policy, symmetric, fixed):
    u = (z - mu) / sigma
    k_max = policy.k_max
    if symmetric:
        if "k" not in fixed and ka < k_max and not np.any((u < -ka) | (u > kb)):
            return {"k": k_max}
        return {}
    out = {}
    if "ka" not in fixed and ka < k_max and not np.any(u < -ka):
        out["ka"] = k_max
    if "kb" not in fixed and kb < k_max and not np.any(u > kb):
        out["kb"] = k_max
    return out


def fit_mle_symmetric(data, policy=DEFAULT_POLICY, start=None, compute_se=True):
    """Maximum-likelihood fit with a common knot ``ka == kb``."""
    return fit_mle(data, policy=policy, symmetric=True, start=start, compute_se=compute_se)


def lrt_common_k(data, policy=DEFAULT_POLICY):
    """Likelihood-ratio test of ``ka == kb`` against free knots.

    The free fit is also started from the common-knot optimum so the nested
    log-likelihoods are ordered; the statistic is referred to chi-squared
    with one degree of freedom.
    """
    data = as_zdata(data)
    common = fit_mle(data, policy=policy, symmetric=True, compute_se=False)
    free = fit_mle(data, policy=policy, compute_se=False)
    try:
        alt = fit_mle(data, policy=policy, start=common.params, compute_se=False)
        if alt.loglik > free.loglik:
            free = alt
    except ConvergenceError:
        pass
    stat = max(0.0, 2.0 * (free.loglik - common.loglik))
    p_value = float(stats.chi2.sf(stat, 1))
    return LrtResult(
        loglik_free=free.loglik,
        loglik_common=common.loglik,
        statistic=stat,
        p_value=p_value,
        boundary_caveat=free.at_boundary or common.at_boundary,
    )


def numerical_hessian(f, x, scale=None, rel_step=None):
    """Central-difference Hessian of a scalar function.

    The step for coordinate ``i`` is ``rel_step * max(|x_i|, scale_i)`` with
    ``rel_step`` defaulting to the fourth root of machine epsilon.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    if scale is None:
        scale = np.ones(d)
    if rel_step is None:
        rel_step = np.finfo(float).eps ** 0.25
    h = rel_step * np.maximum(np.abs(x), np.asarray(scale, dtype=float))
    f0 = f(x)
    hess = np.empty((d, d))
    eye = np.eye(d)
    for i in range(d):
        ei = eye[i] * h[i]
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = eye[j] * h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4.0 * h[i] * h[j]
            )
            hess[i, j] = hess[j, i] = val
    return hess


def _nll_natural(z, k_max, symmetric=False):
    def f(theta):
        if symmetric:
            mu, sigma, k = theta
            ka = kb = k
        else:
            mu, sigma, ka, kb = theta
        if sigma <= 0 or ka <= 0 or kb <= 0:
            return math.inf
        return _nll(z, mu, sigma, ka, kb, k_max)

    return f


def observed_information(p, data, symmetric=False):
    """Observed information matrix at ``p`` (numerical Hessian of the nll).

    Coordinates are ``(mu0, sigma0, ka, kb)``, or ``(mu0, sigma0, k)`` when
    ``symmetric``.

    Raises
    ------
    InformationError
        If the Hessian is not positive definite.
    """
    z = as_zdata(data).values
    if symmetric:
        x = np.array([p.mu0, p.sigma0, p.ka])
        scale = np.array([p.sigma0, p.sigma0, 1.0])
    else:
        x = np.array(p.as_tuple())
        scale = np.array([p.sigma0, p.sigma0, 1.0, 1.0])
    hess = numerical_hessian(_nll_natural(z, p.k_max, symmetric), x, scale=scale)
    hess = 0.5 * (hess + hess.T)
    eig = np.linalg.eigvalsh(hess)
    if not np.all(eig > 0):
        raise InformationError("observed information is not positive definite", eig)
    return hess


def _p0_gradient(ka, kb):
    h = np.finfo(float).eps ** (1 / 3)
    ga = (null_proportion(ka + h * ka, kb) - null_proportion(ka - h * ka, kb)) / (2 * h * ka)
    gb = (null_proportion(ka, kb + h * kb) - null_proportion(ka, kb - h * kb)) / (2 * h * kb)
    return np.array([ga, gb])


def _covariance(p, z, symmetric):
    info = observed_information(p, z, symmetric=symmetric)
    cov = np.linalg.inv(info)
    if symmetric:
        # expand (mu, sigma, k) to (mu, sigma, ka, kb) with ka = kb = k
        jac = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]], dtype=float)
        cov = jac @ cov @ jac.T
    return cov


def _standard_errors(p, z, symmetric):
    cov = _covariance(p, z, symmetric)
    grad = _p0_gradient(p.ka, p.kb)
    var_p0 = float(grad @ cov[2:, 2:] @ grad)
    se = {name: float(math.sqrt(cov[i, i])) for i, name in enumerate(PARAM_NAMES)}
    se["p0"] = math.sqrt(max(var_p0, 0.0))
    return se


def delta_method_intervals(fit, data, level=0.95):
    """Wald intervals from the inverse observed information.

    The interval for ``p0`` propagates the (ka, kb) covariance block through
    a numerical gradient of ``null_proportion``.

    Raises
    ------
    BoundaryError
        The fit has a knot at the boundary; use the bootstrap or MCMC.
    """
    if fit.at_boundary:
        raise BoundaryError(
            "delta-method intervals need an interior optimum; a knot is at k_max. "
            "Use parametric_bootstrap or the MCMC sampler instead.",
            {"boundary_ka": fit.boundary_ka, "boundary_kb": fit.boundary_kb},
        )
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    z = as_zdata(data).values
    se = _standard_errors(fit.params, z, fit.symmetric)
    crit = float(stats.norm.ppf(0.5 + level / 2))
    estimates = _estimates(fit.params)
    intervals = {
        name: (est - crit * se[name], est + crit * se[name]) for name, est in estimates.items()
    }
    return IntervalSet(method="delta", level=level, estimates=estimates,
                       intervals=intervals, se=se)


def _estimates(p):
    out = dict(zip(PARAM_NAMES, p.as_tuple()))
    out["p0"] = p.p0
    return out


def _bootstrap_replicate(params, n, seed_seq, policy, symmetric):
    from .distribution import sample

    rng = np.random.default_rng(seed_seq)
    z = sample(n, params, rng).values
    try:
        rep = fit_mle(z, policy=policy, symmetric=symmetric, compute_se=False)
    except FitError:
        return None
    return (*rep.params.as_tuple(), rep.p0)


def parametric_bootstrap(fit, data, B=1000, seed=None, level=0.95, n_jobs=None,
                         policy=DEFAULT_POLICY):
    """Percentile intervals from refits to datasets simulated from ``fit``.

    Replicate ``b`` draws from its own stream spawned from ``seed``, so the
    result does not depend on ``n_jobs``.

    Raises
    ------
    FitError
        More than ``policy.bootstrap_max_failure`` of the replicates failed.
    """
    if B < 1:
        raise ValueError(f"B must be at least 1, got {B}")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if not fit.converged:
        raise FitError("parametric bootstrap needs a converged fit")
    n = as_zdata(data).n
    children = np.random.SeedSequence(seed).spawn(B)
    if n_jobs in (None, 1):
        reps = [_bootstrap_replicate(fit.params, n, s, policy, fit.symmetric) for s in children]
    else:
        from joblib import Parallel, delayed

        reps = Parallel(n_jobs=n_jobs)(
            delayed(_bootstrap_replicate)(fit.params, n, s, policy, fit.symmetric)
            for s in children
        )
    ok = np.array([r for r in reps if r is not None], dtype=float).reshape(-1, 5)
    failures = B - ok.shape[0]
    if failures > policy.bootstrap_max_failure * B:
        raise FitError(
            f"{failures} of {B} bootstrap replicates failed to converge",
            {"failures": failures, "B": B},
        )
    alpha = 1.0 - level
    names = PARAM_NAMES + ("p0",)
    lo = np.quantile(ok, alpha / 2, axis=0)
    hi = np.quantile(ok, 1 - alpha / 2, axis=0)
    intervals = {name: (float(lo[i]), float(hi[i])) for i, name in enumerate(names)}
    se = {name: float(np.std(ok[:, i], ddof=1)) if ok.shape[0] > 1 else 0.0
          for i, name in enumerate(names)}
    return IntervalSet(
        method="bootstrap",
        level=level,
        estimates=_estimates(fit.params),
        intervals=intervals,
        se=se,
        n_replicates=B,
        n_failures=failures,
        unreliable=ok.shape[0] < 100,
        replicates=ok,
    )
