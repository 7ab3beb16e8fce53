"""Numeric policy shared by every module.

All tolerances and defaults live in one immutable record so callers can
override them in a single place.
"""

from dataclasses import dataclass, replace

K_MAX = 10.0


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances and defaults for fitting, sampling and reporting.

    Parameters
    ----------
    k_max : float
        Knot values at or above this bound are treated as a vanished tail.
    boundary_tol : float
        A knot estimate within this distance of ``k_max`` is flagged as a
        boundary estimate.
    fatol, xatol : float
        Nelder-Mead stopping rules on simplex function-value spread and
        parameter spread.
    max_restarts : int
        Number of simplex restarts from the previous solution.
    maxiter : int
        Iteration cap for each Nelder-Mead run.
    min_n : int
        Smallest sample size accepted by the four-parameter fit.
    k_min : float
        Lower bound on the knots during optimisation.
    """

    k_max: float = K_MAX
    boundary_tol: float = 1e-6
    fatol: float = 1e-10
    xatol: float = 1e-8
    max_restarts: int = 3
    maxiter: int = 20000
    min_n: int = 8
    k_min: float = 1e-3
    irls_tol: float = 1e-12
    irls_maxiter: int = 1000
    bootstrap_max_failure: float = 0.05
    mcmc_target_accept: float = 0.30
    mcmc_accept_band: tuple = (0.05, 0.8)
    call_threshold: float = 0.2

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT_POLICY = NumericPolicy()
