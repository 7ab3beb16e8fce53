"""scikit-learn style wrappers around the fitting functions."""

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import ZData
from .distribution import HuberParams, alt_density, fdr_local, log_density, sample
from .mle import delta_method_intervals, fit_mle, parametric_bootstrap
from .policy import DEFAULT_POLICY
from .regression import RegressionData, fit_huber_lm


def check_z(z):
    """Validate z-values: a finite 1-D array, or an (n, 1) column."""
    z = check_array(z, ensure_2d=False, dtype=np.float64)
    if z.ndim == 2:
        if z.shape[1] != 1:
            raise ValueError(f"expected a single column of z-values, got shape {z.shape}")
        z = z[:, 0]
    return z


class HuberFDR(DensityMixin, BaseEstimator):
    """Two-groups local fdr from a fitted asymmetric Huber distribution.

    Parameters
    ----------
    symmetric : bool, default=False
        Constrain the two knots to be equal.
    threshold : float, default=0.2
        ``predict`` calls an observation non-null when its fdr is below this.
    k_max : float, default=10.0
        Knot boundary treated as a vanished tail.

    Attributes
    ----------
    params_ : HuberParams
    fit_result_ : FitResult
    mu0_, sigma0_, ka_, kb_, p0_ : float
    """

    def __init__(self, symmetric=False, threshold=0.2, k_max=10.0):
        self.symmetric = symmetric
        self.threshold = threshold
        self.k_max = k_max

    def _policy(self):
        return DEFAULT_POLICY.with_(k_max=self.k_max)

    def fit(self, X, y=None):
        z = check_z(X)
        self.z_ = z
        self.fit_result_ = fit_mle(ZData(z), policy=self._policy(), symmetric=self.symmetric)
        self.params_ = self.fit_result_.params
        self.mu0_, self.sigma0_, self.ka_, self.kb_ = self.params_.as_tuple()
        self.p0_ = self.fit_result_.p0
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Local fdr of each z-value."""
        check_is_fitted(self, "params_")
        return np.atleast_1d(fdr_local(check_z(X), self.params_))

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

    def predict(self, X):
        """True where the observation is called non-null."""
        return self.transform(X) < self.threshold

    def predict_proba(self, X):
        """Columns: P(null | z), P(non-null | z)."""
        fdr = self.transform(X)
        return np.column_stack([fdr, 1.0 - fdr])

    def score_samples(self, X):
        check_is_fitted(self, "params_")
        return np.atleast_1d(log_density(check_z(X), self.params_))

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def alternative_density(self, X):
        check_is_fitted(self, "params_")
        return np.atleast_1d(alt_density(check_z(X), self.params_))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "params_")
        return sample(n_samples, self.params_, random_state).values

    def confidence_intervals(self, method="delta", level=0.95, B=1000, random_state=None):
        check_is_fitted(self, "params_")
        if method == "delta":
            return delta_method_intervals(self.fit_result_, self.z_, level)
        if method == "bootstrap":
            return parametric_bootstrap(self.fit_result_, self.z_, B=B, seed=random_state,
                                        level=level, policy=self._policy())
        raise ValueError(f"unknown interval method {method!r}")


class HuberLinearRegression(RegressorMixin, BaseEstimator):
    """Linear regression with asymmetric-Huber errors.

    Parameters
    ----------
    fit_intercept : bool, default=True
    k_max : float, default=10.0

    Attributes
    ----------
    coef_ : ndarray
    intercept_ : float
    scale_, ka_, kb_ : float
    fit_result_ : RegressionFit
    """

    def __init__(self, fit_intercept=True, k_max=10.0):
        self.fit_intercept = fit_intercept
        self.k_max = k_max

    def _design(self, X):
        if self.fit_intercept:
            return np.column_stack([np.ones(X.shape[0]), X])
        return X

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        data = RegressionData(self._design(X), y)
        self.fit_result_ = fit_huber_lm(data, policy=DEFAULT_POLICY.with_(k_max=self.k_max))
        beta = self.fit_result_.beta
        if self.fit_intercept:
            self.intercept_, self.coef_ = float(beta[0]), beta[1:]
        else:
            self.intercept_, self.coef_ = 0.0, beta
        self.scale_ = self.fit_result_.scale
        self.ka_, self.kb_ = self.fit_result_.ka, self.fit_result_.kb
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def residual_fdr(self, X, y):
        """Local fdr of each residual under the fitted error distribution."""
        check_is_fitted(self, "coef_")
        resid = np.asarray(y, dtype=float) - self.predict(X)
        return np.atleast_1d(fdr_local(resid, HuberParams(0.0, self.scale_, self.ka_, self.kb_,
                                                          self.k_max)))
