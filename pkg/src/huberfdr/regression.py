"""Linear regression with asymmetric-Huber errors.

``y = X beta + e`` with ``e ~ H(0, sigma, ka, kb)``.  The coefficients are
profiled out: for fixed ``(sigma, ka, kb)`` the objective in ``beta`` is
convex and is minimised by iteratively reweighted least squares with the
clipped-residual weights ``psi(u) / u``; a Nelder-Mead simplex handles the
outer three coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .distribution import HuberParams, fdr_local, psi
from .mle import ConvergenceError, FitError, _nll, _robust_start, numerical_hessian
from .policy import DEFAULT_POLICY


class RankDeficiencyError(ValueError):
    def __init__(self, message, dependent_columns):
        super().__init__(message)
        self.dependent_columns = list(dependent_columns)


@dataclass(frozen=True, eq=False)
class RegressionData:
    X: np.ndarray
    y: np.ndarray
    column_names: tuple = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        names = self.column_names
        if names is None:
            names = tuple(f"x{j}" for j in range(X.shape[1]))
        names = tuple(names)
        if len(names) != X.shape[1]:
            raise ValueError("column_names must match the number of columns of X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def validate(self):
        """Check ``n > p + 4`` and full column rank.

        Raises
        ------
        RankDeficiencyError
            Naming the columns that are linear combinations of the others.
        """
        if self.n <= self.p + 4:
            raise ValueError(f"need more than p + 4 = {self.p + 4} rows, got {self.n}")
        _, r, piv = linalg.qr(self.X, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        tol = diag.max() * max(self.X.shape) * np.finfo(float).eps if diag.size else 0.0
        rank = int(np.sum(diag > tol))
        if rank < self.p:
            dependent = [self.column_names[j] for j in sorted(piv[rank:])]
            raise RankDeficiencyError(
                f"design matrix has rank {rank} < {self.p}; dependent columns: "
                + ", ".join(dependent),
                dependent,
            )


@dataclass(frozen=True)
class RegressionFit:
    beta: np.ndarray
    scale: float
    ka: float
    kb: float
    loglik: float
    converged: bool
    se_beta: np.ndarray = None
    column_names: tuple = ()
    boundary_ka: bool = False
    boundary_kb: bool = False
    se_approximate: bool = False
    k_max: float = 10.0

    @property
    def error_params(self):
        return HuberParams(0.0, self.scale, self.ka, self.kb, self.k_max)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return X @ self.beta

    def to_dict(self):
        return {
            "beta": [float(b) for b in self.beta],
            "column_names": list(self.column_names),
            "scale": self.scale,
            "ka": self.ka,
            "kb": self.kb,
            "k_max": self.k_max,
            "loglik": self.loglik,
            "converged": self.converged,
            "se_beta": None if self.se_beta is None else [float(s) for s in self.se_beta],
            "boundary_ka": self.boundary_ka,
            "boundary_kb": self.boundary_kb,
            "se_approximate": self.se_approximate,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["beta"] = np.array(d["beta"], dtype=float)
        d["column_names"] = tuple(d["column_names"])
        if d["se_beta"] is not None:
            d["se_beta"] = np.array(d["se_beta"], dtype=float)
        return cls(**d)


def _irls(X, y, beta, sigma, ka, kb, tol, maxiter):
    """Minimise sum rho((y - X beta) / sigma) over beta."""
    for it in range(maxiter):
        u = (y - X @ beta) / sigma
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(u == 0, 1.0, psi(u, ka, kb) / u)
        sw = np.sqrt(w)
        new, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
        step = np.max(np.abs(new - beta))
        beta = new
        if step <= tol * (1.0 + np.max(np.abs(beta))):
            return beta, True, it + 1
    return beta, False, maxiter


def _resolve_knots(ka, kb, k_max):
    return (math.inf if ka >= k_max else ka), (math.inf if kb >= k_max else kb)


class _Profile:
    def __init__(self, X, y, beta0, policy, fixed):
        self.X, self.y = X, y
        self.beta = beta0
        self.policy = policy
        self.fixed = dict(fixed)
        self.best = (math.inf, None)
        self.irls_failures = 0

    def unpack(self, x):
        it = iter(x)
        sigma = math.exp(next(it))
        k_max = self.policy.k_max
        ka = self.fixed["ka"] if "ka" in self.fixed else min(math.exp(next(it)), k_max)
        kb = self.fixed["kb"] if "kb" in self.fixed else min(math.exp(next(it)), k_max)
        return sigma, ka, kb

    def pack(self, sigma, ka, kb):
        return np.array([math.log(sigma)] + [math.log(v) for n, v in (("ka", ka), ("kb", kb))
                                              if n not in self.fixed])

    def __call__(self, x):
        sigma, ka, kb = self.unpack(x)
        ka_e, kb_e = _resolve_knots(ka, kb, self.policy.k_max)
        beta, ok, _ = _irls(self.X, self.y, self.beta, sigma, ka_e, kb_e,
                            self.policy.irls_tol, self.policy.irls_maxiter)
        if not ok:
            self.irls_failures += 1
        self.beta = beta
        val = _nll(self.y - self.X @ beta, 0.0, sigma, ka, kb, self.policy.k_max)
        if val < self.best[0]:
            self.best = (val, (beta.copy(), sigma, ka, kb))
        return val


def fit_huber_lm(data, policy=DEFAULT_POLICY):
    """Maximum-likelihood regression with asymmetric-Huber errors.

    Returns
    -------
    RegressionFit

    Raises
    ------
    RankDeficiencyError
        The design matrix is not of full column rank.
    ConvergenceError
        The outer simplex failed to settle.
    """
    data.validate()
    X, y = data.X, data.y
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    _, sigma = _robust_start(y - X @ beta)
    ka = kb = 1.5
    fixed = {}
    for _ in range(3):
        prof = _Profile(X, y, beta, policy, fixed)
        x0 = prof.pack(sigma, ka, kb)
        bounds = [(None, None)] + [(math.log(policy.k_min), math.log(policy.k_max))] * (x0.size - 1)
        steps = np.array([0.1] + [0.2] * (x0.size - 1))
        res = None
        restarts = 0
        while True:
            sim = [x0] + [x0 + np.eye(x0.size)[i] * steps[i] for i in range(x0.size)]
            sim = np.clip(np.array(sim), [b[0] if b[0] is not None else -np.inf for b in bounds],
                          [b[1] if b[1] is not None else np.inf for b in bounds])
            # a vertex clipped onto x0 would make the simplex degenerate
            for i in range(1, len(sim)):
                if np.array_equal(sim[i], x0):
                    sim[i, i - 1] -= steps[i - 1]
            new = optimize.minimize(prof, x0, method="Nelder-Mead", bounds=bounds,
                                    options=dict(fatol=policy.fatol, xatol=policy.xatol,
                                                 maxiter=policy.maxiter, initial_simplex=sim))
            gain = math.inf if res is None else res.fun - new.fun
            if res is None or new.fun <= res.fun:
                res = new
            x0 = prof.pack(*prof.best[1][1:])
            if new.success and gain <= max(1e-7, 1e-12 * abs(new.fun)):
                break
            restarts += 1
            if restarts > policy.max_restarts:
                raise ConvergenceError("outer simplex did not converge",
                                       {"message": new.message, "fun": float(new.fun)})
        _, (beta, sigma, ka, kb) = prof.best
        r = (y - X @ beta) / sigma
        newly = {}
        if "ka" not in fixed and ka < policy.k_max and not np.any(r < -ka):
            newly["ka"] = policy.k_max
        if "kb" not in fixed and kb < policy.k_max and not np.any(r > kb):
            newly["kb"] = policy.k_max
        if not newly:
            break
        fixed.update(newly)
        ka, kb = fixed.get("ka", ka), fixed.get("kb", kb)

    # polish beta at the final outer point so loglik is exactly consistent
    ka_e, kb_e = _resolve_knots(ka, kb, policy.k_max)
    polished, ok, _ = _irls(X, y, beta, sigma, ka_e, kb_e, policy.irls_tol, policy.irls_maxiter)
    nll_polished = _nll(y - X @ polished, 0.0, sigma, ka, kb, policy.k_max)
    if nll_polished <= prof.best[0]:
        beta = polished
    if not ok:
        raise FitError("IRLS did not converge for the coefficients",
                       {"irls_failures": prof.irls_failures})
    loglik = -_nll(y - X @ beta, 0.0, sigma, ka, kb, policy.k_max)
    boundary_ka = ka >= policy.k_max - policy.boundary_tol
    boundary_kb = kb >= policy.k_max - policy.boundary_tol
    se_beta = _se_beta(X, y, beta, sigma, ka, kb, policy.k_max, boundary_ka, boundary_kb)
    return RegressionFit(
        beta=beta,
        scale=sigma,
        ka=ka,
        kb=kb,
        loglik=loglik,
        converged=True,
        se_beta=se_beta,
        column_names=data.column_names,
        boundary_ka=bool(boundary_ka),
        boundary_kb=bool(boundary_kb),
        se_approximate=bool(boundary_ka or boundary_kb or min(ka, kb) > policy.k_max - 1.0),
        k_max=policy.k_max,
    )


def _se_beta(X, y, beta, sigma, ka, kb, k_max, boundary_ka, boundary_kb):
    p = beta.size
    free_ka, free_kb = not boundary_ka, not boundary_kb

    def f(theta):
        b = theta[:p]
        rest = list(theta[p:])
        s = rest.pop(0)
        a = rest.pop(0) if free_ka else ka
        c = rest.pop(0) if free_kb else kb
        if s <= 0 or a <= 0 or c <= 0:
            return math.inf
        return _nll(y - X @ b, 0.0, s, a, c, k_max)

    theta = np.concatenate([beta, [sigma] + ([ka] if free_ka else []) + ([kb] if free_kb else [])])
    scale = np.concatenate([np.full(p, sigma), [sigma], np.ones(theta.size - p - 1)])
    hess = numerical_hessian(f, theta, scale=scale)
    hess = 0.5 * (hess + hess.T)
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return None
    var = np.diag(cov)[:p]
    if not np.all(var > 0):
        return None
    return np.sqrt(var)


def regression_fdr(fit, data):
    """Local fdr of each residual under ``H(0, scale, ka, kb)``."""
    resid = data.y - data.X @ fit.beta
    return np.atleast_1d(fdr_local(resid, fit.error_params))

