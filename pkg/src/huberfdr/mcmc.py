"""Random-walk Metropolis sampling of (mu0, sigma0, ka, kb).

The chain moves on (mu0, log sigma0, log ka, log kb).  Priors are uniform
on mu0, on log sigma0 and on each knot, so the target in the transformed
coordinates carries the Jacobian ``ka * kb``.  Proposal scales adapt only
during burn-in and are frozen afterwards.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import as_zdata
from .distribution import null_proportion
from .mle import FitError, _nll, _robust_start, fit_mle
from .policy import DEFAULT_POLICY

COLUMNS = ("mu0", "sigma0", "ka", "kb", "p0")


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform priors on mu0, log sigma0 and each knot."""

    mu_range: tuple
    log_sigma_range: tuple
    k_range: tuple

    def __post_init__(self):
        for name in ("mu_range", "log_sigma_range", "k_range"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a finite non-empty interval, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        if self.k_range[0] <= 0:
            raise ValueError("k_range must lie in (0, k_max]")

    def check_k_max(self, k_max):
        if self.k_range[1] > k_max:
            raise ValueError(f"k_range upper end {self.k_range[1]} exceeds k_max = {k_max}")

    def contains(self, mu, log_sigma, ka, kb):
        return (
            self.mu_range[0] <= mu <= self.mu_range[1]
            and self.log_sigma_range[0] <= log_sigma <= self.log_sigma_range[1]
            and self.k_range[0] < ka <= self.k_range[1]
            and self.k_range[0] < kb <= self.k_range[1]
        )


def default_prior(data, policy=DEFAULT_POLICY):
    """Data-scaled default prior; needs at least two distinct values."""
    z = as_zdata(data).values
    if z.size < 2:
        raise ValueError("default prior needs data; pass an explicit PriorSpec")
    span = float(z.max() - z.min())
    _, mad = _robust_start(z)
    if not span > 0:
        raise ValueError("default prior needs at least two distinct z-values")
    return PriorSpec(
        mu_range=(float(z.min()) - span, float(z.max()) + span),
        log_sigma_range=(math.log(mad / 10), math.log(10 * mad)),
        k_range=(0.05, policy.k_max),
    )


@dataclass(frozen=True, eq=False)
class PosteriorChain:
    """Post-burn-in draws; columns are ``COLUMNS``."""

    draws: np.ndarray
    burnin: int
    acceptance_rate: float
    seed: object
    step_sizes: tuple = ()
    acceptance_warning: bool = False

    def column(self, name):
        return self.draws[:, COLUMNS.index(name)]

    def __len__(self):
        return self.draws.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PosteriorChain):
            return NotImplemented
        return (np.array_equal(self.draws, other.draws) and self.burnin == other.burnin
                and self.acceptance_rate == other.acceptance_rate and self.seed == other.seed)


def _log_target(z, prior, k_max, x):
    mu, log_sigma, log_ka, log_kb = x
    ka, kb = math.exp(log_ka), math.exp(log_kb)
    if not prior.contains(mu, log_sigma, ka, kb):
        return -math.inf
    lp = log_ka + log_kb
    if z.size:
        lp -= _nll(z, mu, math.exp(log_sigma), min(ka, k_max), min(kb, k_max), k_max)
    return lp


def _start_state(z, prior, policy):
    if z.size >= policy.min_n:
        try:
            fit = fit_mle(z, policy=policy)
        except FitError:
            fit = None
        if fit is not None:
            p = fit.params
            k_lo, k_hi = prior.k_range
            ka = min(max(p.ka, k_lo * 1.01), k_hi)
            kb = min(max(p.kb, k_lo * 1.01), k_hi)
            x = np.array([p.mu0, math.log(p.sigma0), math.log(ka), math.log(kb)])
            if fit.se is not None:
                se = fit.se
                scale = np.array([se["mu0"], se["sigma0"] / p.sigma0, se["ka"] / p.ka, se["kb"] / p.kb])
            else:
                scale = np.array([0.1 * p.sigma0 / math.sqrt(z.size), 0.05, 0.2, 0.2])
            if prior.contains(x[0], x[1], ka, kb):
                return x, scale
    mid = lambda r: 0.5 * (r[0] + r[1])  # noqa: E731
    k0 = mid(prior.k_range)
    x = np.array([mid(prior.mu_range), mid(prior.log_sigma_range), math.log(k0), math.log(k0)])
    scale = np.array([
        0.1 * (prior.mu_range[1] - prior.mu_range[0]),
        0.1 * (prior.log_sigma_range[1] - prior.log_sigma_range[0]),
        0.3, 0.3,
    ])
    return x, scale


def run_chain(data, prior=None, iters=20000, burnin=5000, seed=None, policy=DEFAULT_POLICY):
    """Adaptive random-walk Metropolis chain targeting likelihood times prior.

    Parameters
    ----------
    data : ZData or array_like
        z-values; may be empty, in which case the chain samples the prior.
    prior : PriorSpec, optional
        Defaults to ``default_prior(data)``.
    iters, burnin : int
        Total iterations and how many of them to discard; adaptation runs
        only during burn-in.
    seed : int, optional

    Returns
    -------
    PosteriorChain
        ``iters - burnin`` draws with the derived ``p0`` column.
    """
    iters, burnin = int(iters), int(burnin)
    if not iters > burnin >= 0:
        raise ValueError(f"need iters > burnin >= 0, got iters={iters}, burnin={burnin}")
    z = as_zdata(data).values
    if prior is None:
        prior = default_prior(z, policy)
    prior.check_k_max(policy.k_max)
    k_max = policy.k_max

    x, scale = _start_state(z, prior, policy)
    scale = scale * 2.38 / 2.0
    logp = _log_target(z, prior, k_max, x)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((iters, 4))
    log_u = np.log(rng.random(iters))

    log_lambda = 0.0
    target = policy.mcmc_target_accept
    history = np.empty((iters, 4))
    accepted_post = 0
    for t in range(iters):
        prop = x + math.exp(log_lambda) * scale * noise[t]
        logp_prop = _log_target(z, prior, k_max, prop)
        accept_prob = 0.0 if logp_prop == -math.inf else min(1.0, math.exp(min(0.0, logp_prop - logp)))
        accepted = log_u[t] < logp_prop - logp
        if accepted:
            x, logp = prop, logp_prop
            if t > burnin:
                accepted_post += 1
        history[t] = x
        if t < burnin:
            # Robbins-Monro on the global scale; per-coordinate scales track
            # the spread of the second half of the burn-in so far
            log_lambda += (accept_prob - target) / (t + 1) ** 0.6
            if t >= 200 and t % 100 == 0:
                recent = history[t // 2: t + 1]
                sd = recent.std(axis=0)
                if np.all(sd > 0):
                    scale = sd * 2.38 / 2.0

    kept = history[burnin:]
    ka, kb = np.exp(kept[:, 2]), np.exp(kept[:, 3])
    ka_eff = np.where(ka >= k_max, np.inf, ka)
    kb_eff = np.where(kb >= k_max, np.inf, kb)
    draws = np.column_stack([kept[:, 0], np.exp(kept[:, 1]), ka, kb,
                             np.atleast_1d(null_proportion(ka_eff, kb_eff))])
    m = draws.shape[0]
    rate = accepted_post / (m - 1) if m > 1 else 0.0
    lo, hi = policy.mcmc_accept_band
    warn = not lo <= rate <= hi
    if warn:
        warnings.warn(f"MCMC acceptance rate {rate:.3f} outside [{lo}, {hi}]", RuntimeWarning)
    return PosteriorChain(
        draws=draws,
        burnin=burnin,
        acceptance_rate=rate,
        seed=seed,
        step_sizes=tuple(float(v) for v in math.exp(log_lambda) * scale),
        acceptance_warning=warn,
    )


def posterior_summary(chain, level=0.95, min_draws=1000):
    """Means, medians, SDs and equal-tailed credible intervals.

    Interval endpoints are order statistics of the draws.

    Raises
    ------
    ValueError
        Fewer than ``min_draws`` post-burn-in draws.
    """
    if len(chain) < min_draws:
        raise ValueError(f"chain has {len(chain)} draws; need at least {min_draws}")
    alpha = 1.0 - level
    out = {}
    for j, name in enumerate(COLUMNS):
        col = chain.draws[:, j]
        out[name] = {
            "mean": float(np.mean(col)),
            "median": float(np.quantile(col, 0.5, method="inverted_cdf")),
            "sd": float(np.std(col, ddof=1)),
            "interval": (
                float(np.quantile(col, alpha / 2, method="inverted_cdf")),
                float(np.quantile(col, 1 - alpha / 2, method="inverted_cdf")),
            ),
        }
    return out


def _autocorrelation(x):
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / acov[0]


def effective_sample_size(x):
    """Initial-positive-sequence ESS; ``None`` for a constant series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.ptp(x) == 0:
        return None
    rho = _autocorrelation(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / tau)


def chain_diagnostics(chain):
    """Acceptance rate, lag-1 autocorrelation, ESS and split-half drift."""
    draws = chain.draws
    m = draws.shape[0]
    if m == 0:
        raise ValueError("empty chain")
    moved = np.any(np.diff(draws[:, :4], axis=0) != 0, axis=1)
    out = {"acceptance_rate": float(moved.mean()) if m > 1 else 0.0, "n_draws": m, "params": {}}
    half = m // 2
    for j, name in enumerate(COLUMNS):
        col = draws[:, j]
        degenerate = bool(np.ptp(col) == 0)
        entry = {"degenerate": degenerate}
        if degenerate or m < 4:
            entry.update(lag1_autocorr=None, ess=None, split_half_diff=0.0, split_half_z=None)
        else:
            ess = effective_sample_size(col)
            diff = float(col[:half].mean() - col[half:].mean())
            sd = float(col.std(ddof=1))
            entry.update(
                lag1_autocorr=float(_autocorrelation(col)[1]),
                ess=ess,
                split_half_diff=diff,
                # each half carries about ess/2 effective draws
                split_half_z=diff / (sd * math.sqrt(4.0 / ess)) if ess else None,
            )
        out["params"][name] = entry
    return out
