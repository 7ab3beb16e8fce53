"""The asymmetric Huber distribution H(mu0, sigma0, ka, kb).

The density has a Gaussian core on the standardized interval ``[-ka, kb]``
and exponential tails outside it.  Read as a two-groups model with null
``N(mu0, sigma0**2)``, the local false discovery rate is exactly one on the
core and decays like a half-normal outside it, which pins down the null
proportion ``p0`` and the alternative density ``f1``.

All functions are vectorised over ``z`` and pure.  A knot at or above
``k_max`` is treated as infinite: that tail carries no non-null mass.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .data import ZData
from .policy import K_MAX

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)


class DistributionError(ValueError):
    """Raised for arguments outside the domain of a distribution function."""


class NoAlternativeError(DistributionError):
    """Raised when the alternative density is requested but ``p0 == 1``."""


@dataclass(frozen=True)
class HuberParams:
    """Location, scale and the two knots of an asymmetric Huber distribution.

    ``ka`` and ``kb`` are in standardized units.  ``k_max`` is the boundary
    beyond which a tail is considered to have vanished.
    """

    mu0: float
    sigma0: float
    ka: float
    kb: float
    k_max: float = K_MAX

    def __post_init__(self):
        for name in ("mu0", "sigma0", "ka", "kb", "k_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not math.isfinite(self.mu0):
            raise DistributionError(f"mu0 must be finite, got {self.mu0}")
        if not (self.sigma0 > 0 and math.isfinite(self.sigma0)):
            raise DistributionError(f"sigma0 must be positive, got {self.sigma0}")
        for name in ("ka", "kb"):
            k = getattr(self, name)
            if not 0 < k <= self.k_max:
                raise DistributionError(f"{name} must lie in (0, {self.k_max}], got {k}")

    @property
    def ka_vanished(self):
        return self.ka >= self.k_max

    @property
    def kb_vanished(self):
        return self.kb >= self.k_max

    @property
    def ka_eff(self):
        return math.inf if self.ka_vanished else self.ka

    @property
    def kb_eff(self):
        return math.inf if self.kb_vanished else self.kb

    @property
    def p0(self):
        return null_proportion(self.ka_eff, self.kb_eff)

    @property
    def is_pure_null(self):
        return self.ka_vanished and self.kb_vanished

    def standardize(self, z):
        return (np.asarray(z, dtype=float) - self.mu0) / self.sigma0

    def unstandardize(self, u):
        return self.mu0 + self.sigma0 * np.asarray(u, dtype=float)

    def as_tuple(self):
        return (self.mu0, self.sigma0, self.ka, self.kb)


def _check_knots(ka, kb):
    ka = np.asarray(ka, dtype=float)
    kb = np.asarray(kb, dtype=float)
    if np.any(~(ka > 0)) or np.any(~(kb > 0)):
        raise DistributionError(f"knots must be positive, got ka={ka}, kb={kb}")
    return ka, kb


def _tail_integral(k):
    # integral of exp(-k*u + k**2/2) over u > k, i.e. exp(-k**2/2) / k
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return np.where(np.isinf(k), 0.0, np.exp(-0.5 * k * k) / k)


def _unnormalised_mass(ka, kb):
    core = SQRT_2PI * (1.0 - special.ndtr(-ka) - special.ndtr(-kb))
    return _tail_integral(ka) + _tail_integral(kb) + core


def null_proportion(ka, kb):
    """Proportion of nulls implied by the knots.

    Parameters
    ----------
    ka, kb : float or array_like
        Positive knots; ``np.inf`` denotes a vanished tail.

    Returns
    -------
    float or ndarray
        ``sqrt(2 pi) / (exp(-ka^2/2)/ka + exp(-kb^2/2)/kb
        + sqrt(2 pi) (Phi(ka) + Phi(kb) - 1))``, in ``(0, 1]``.
    """
    ka, kb = _check_knots(ka, kb)
    out = SQRT_2PI / _unnormalised_mass(ka, kb)
    return float(out) if out.ndim == 0 else out


def _tail_excess(k):
    # exp(-k^2/2)/k - sqrt(2 pi) Phi(-k), written through erfcx to keep
    # relative accuracy when both terms are tiny
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        val = np.exp(-0.5 * k * k) * (
            1.0 / k - SQRT_2PI * 0.5 * special.erfcx(k / math.sqrt(2.0))
        )
    return np.where(np.isinf(k), 0.0, val)


def nonnull_proportion(ka, kb):
    """``1 - null_proportion(ka, kb)`` without cancellation near ``p0 = 1``."""
    ka, kb = _check_knots(ka, kb)
    out = (_tail_excess(ka) + _tail_excess(kb)) / _unnormalised_mass(ka, kb)
    return float(out) if out.ndim == 0 else out


def _rho(u, ka, kb):
    """Negative log of the unnormalised standardized density."""
    u = np.asarray(u, dtype=float)
    out = 0.5 * u * u
    if math.isfinite(ka):
        lo = u < -ka
        out = np.where(lo, -ka * u - 0.5 * ka * ka, out)
    if math.isfinite(kb):
        hi = u > kb
        out = np.where(hi, kb * u - 0.5 * kb * kb, out)
    return out


def psi(u, ka, kb):
    """Derivative of ``_rho``: ``u`` clipped to ``[-ka, kb]``."""
    return np.clip(np.asarray(u, dtype=float), -ka, kb)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def log_density(z, p):
    """Log of the marginal density f^H at ``z``."""
    u = p.standardize(z)
    out = math.log(p.p0) - math.log(p.sigma0) - LOG_SQRT_2PI - _rho(u, p.ka_eff, p.kb_eff)
    return _scalar(out)


def density(z, p):
    return _scalar(np.exp(log_density(z, p)))


def log_null_density(z, p):
    """Log of the N(mu0, sigma0^2) null density f0."""
    u = p.standardize(z)
    return _scalar(-0.5 * u * u - math.log(p.sigma0) - LOG_SQRT_2PI)


def null_density(z, p):
    return _scalar(np.exp(log_null_density(z, p)))


def log_fdr_local(z, p):
    u = p.standardize(z)
    out = np.zeros_like(u)
    ka, kb = p.ka_eff, p.kb_eff
    if math.isfinite(ka):
        out = np.where(u < -ka, -0.5 * (u + ka) ** 2, out)
    if math.isfinite(kb):
        out = np.where(u > kb, -0.5 * (u - kb) ** 2, out)
    return _scalar(out)


def fdr_local(z, p):
    """Local false discovery rate: one on the core, half-normal decay outside."""
    return _scalar(np.exp(log_fdr_local(z, p)))


def alt_density(z, p):
    """Density of the non-null component implied by ``fdr_local``.

    Raises
    ------
    NoAlternativeError
        If both tails have vanished, so ``p0 == 1``.
    """
    if p.is_pure_null:
        raise NoAlternativeError(
            "both knots are at the boundary; p0 = 1 and there is no alternative component"
        )
    log_fdr = np.asarray(log_fdr_local(z, p))
    log_f0 = np.asarray(log_null_density(z, p))
    # p0 f0 (1 - fdr) / fdr, with the ratio f0/fdr formed in log space
    numer = p.p0 * np.exp(log_f0 - log_fdr) * -np.expm1(log_fdr)
    return _scalar(numer / nonnull_proportion(p.ka_eff, p.kb_eff))


def _log_left_tail_mass(p):
    ka = p.ka_eff
    if math.isinf(ka):
        return -math.inf
    return math.log(p.p0) - 0.5 * ka * ka - LOG_SQRT_2PI - math.log(ka)


def _log_right_tail_mass(p):
    kb = p.kb_eff
    if math.isinf(kb):
        return -math.inf
    return math.log(p.p0) - 0.5 * kb * kb - LOG_SQRT_2PI - math.log(kb)


def _lower_cdf_std(u, p):
    """P(U <= u) for u <= 0 (or anywhere left of the right knot)."""
    ka = p.ka_eff
    log_ca = _log_left_tail_mass(p)
    with np.errstate(over="ignore"):
        tail = np.exp(log_ca + ka * (u + ka)) if math.isfinite(ka) else np.zeros_like(u)
    core = math.exp(log_ca) + p.p0 * (special.ndtr(u) - special.ndtr(-ka))
    return np.where(u < -ka, tail, core)


def _upper_sf_std(u, p):
    """P(U > u), the mirror image of ``_lower_cdf_std``."""
    kb = p.kb_eff
    log_cb = _log_right_tail_mass(p)
    with np.errstate(over="ignore"):
        tail = np.exp(log_cb - kb * (u - kb)) if math.isfinite(kb) else np.zeros_like(u)
    core = math.exp(log_cb) + p.p0 * (special.ndtr(-u) - special.ndtr(-kb))
    return np.where(u > kb, tail, core)


def cdf(z, p):
    """Closed-form distribution function of f^H."""
    u = np.asarray(p.standardize(z))
    left = u <= 0
    out = np.where(left, _lower_cdf_std(np.where(left, u, 0.0), p),
                   1.0 - _upper_sf_std(np.where(left, 0.0, u), p))
    return _scalar(np.clip(out, 0.0, 1.0))


def sf(z, p):
    """Survival function ``1 - cdf``, accurate in the right tail."""
    u = np.asarray(p.standardize(z))
    right = u > 0
    out = np.where(right, _upper_sf_std(np.where(right, u, 0.0), p),
                   1.0 - _lower_cdf_std(np.where(right, 0.0, u), p))
    return _scalar(np.clip(out, 0.0, 1.0))


def _lower_quantile_std(q, p):
    """Inverse of ``_lower_cdf_std`` for q <= P(U <= 0)."""
    ka = p.ka_eff
    log_ca = _log_left_tail_mass(p)
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    tail = -ka + (logq - log_ca) / ka if math.isfinite(ka) else np.full_like(q, -np.inf)
    core_target = special.ndtr(-ka) + (q - math.exp(log_ca)) / p.p0
    core = special.ndtri(np.clip(core_target, 0.0, 1.0))
    return np.where(logq < log_ca, tail, core)


def quantile(q, p):
    """Inverse distribution function, piecewise closed form.

    Raises
    ------
    DistributionError
        If any ``q`` lies outside the open interval (0, 1).
    """
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DistributionError("quantile levels must lie strictly inside (0, 1)")
    median_mass = float(cdf(p.mu0, p))
    lower = q <= median_mass
    u_lo = _lower_quantile_std(np.where(lower, q, median_mass), p)
    u_hi = -_lower_quantile_std(np.where(lower, 1.0 - median_mass, 1.0 - q), _mirror(p))
    return _scalar(p.unstandardize(np.where(lower, u_lo, u_hi)))


def isf(q, p):
    """Inverse survival function; exact for upper-tail probabilities."""
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DistributionError("tail probabilities must lie strictly inside (0, 1)")
    m = _mirror(p)
    return _scalar(2 * p.mu0 - np.asarray(quantile(q, m)))


def _mirror(p):
    # distribution of 2*mu0 - Z: the knots swap sides
    return HuberParams(p.mu0, p.sigma0, p.kb, p.ka, p.k_max)


def sample(n, p, seed=None, label="simulated"):
    """Draw ``n`` i.i.d. values by inverting the cdf on a seeded uniform stream.

    ``seed`` may be an integer, ``None`` or a ``numpy.random.Generator``.
    """
    n = int(n)
    if n < 1:
        raise DistributionError(f"n must be at least 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tiny = np.finfo(float).tiny
    uniforms = np.clip(rng.random(n), tiny, 1.0 - np.finfo(float).epsneg)
    return ZData(np.atleast_1d(quantile(uniforms, p)), label=label)
