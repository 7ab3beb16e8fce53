import math

import numpy as np
import pytest

from huberfdr import HuberParams, RegressionData, fit_huber_lm, fit_mle, regression_fdr, sample
from huberfdr.distribution import alt_density, density, null_density
from huberfdr.regression import RankDeficiencyError, RegressionFit


@pytest.fixture(scope="module")
def linear_data():
    rng = np.random.default_rng(12)
    x = rng.uniform(-2, 2, 5000)
    e = sample(5000, HuberParams(0, 1, 1.5, 1.5), seed=13).values
    return RegressionData(np.column_stack([np.ones_like(x), x]), 2 + 3 * x + e, ("(Intercept)", "x"))


@pytest.fixture(scope="module")
def linear_fit(linear_data):
    return fit_huber_lm(linear_data)


def test_intercept_only_matches_location_fit():
    z = sample(1500, HuberParams(0.4, 1.3, 1.4, 1.9), seed=5).values
    loc = fit_mle(z)
    reg = fit_huber_lm(RegressionData(np.ones((z.size, 1)), z))
    assert reg.beta[0] == pytest.approx(loc.params.mu0, abs=1e-5)
    assert reg.scale == pytest.approx(loc.params.sigma0, abs=1e-5)
    assert reg.ka == pytest.approx(loc.params.ka, abs=1e-5)
    assert reg.kb == pytest.approx(loc.params.kb, abs=1e-5)
    assert reg.loglik == pytest.approx(loc.loglik, abs=1e-6)


def test_recovers_coefficients(linear_fit):
    np.testing.assert_allclose(linear_fit.beta, [2.0, 3.0], atol=0.1)
    assert linear_fit.converged
    assert linear_fit.se_beta is not None and np.all(linear_fit.se_beta > 0)


def test_loglik_consistent(linear_data, linear_fit):
    resid = linear_data.y - linear_data.X @ linear_fit.beta
    direct = float(np.sum(np.log(density(resid, linear_fit.error_params))))
    assert linear_fit.loglik == pytest.approx(direct, rel=1e-9)


def test_scale_equivariance(linear_data, linear_fit):
    c = 2.5
    scaled = fit_huber_lm(RegressionData(linear_data.X, c * linear_data.y))
    np.testing.assert_allclose(scaled.beta, c * linear_fit.beta, rtol=1e-5)
    assert scaled.scale == pytest.approx(c * linear_fit.scale, rel=1e-5)
    assert scaled.ka == pytest.approx(linear_fit.ka, abs=1e-4)
    assert scaled.kb == pytest.approx(linear_fit.kb, abs=1e-4)


def test_shift_equivariance(linear_data, linear_fit):
    shifted = fit_huber_lm(RegressionData(linear_data.X, linear_data.y + 7.0))
    assert shifted.beta[0] == pytest.approx(linear_fit.beta[0] + 7.0, abs=1e-5)
    assert shifted.beta[1] == pytest.approx(linear_fit.beta[1], abs=1e-5)


def test_rank_deficiency_names_columns():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    X = np.column_stack([np.ones(50), x, 2 * x])
    with pytest.raises(RankDeficiencyError) as info:
        fit_huber_lm(RegressionData(X, rng.normal(size=50), ("one", "x", "twice_x")))
    assert info.value.dependent_columns in (["x"], ["twice_x"])


def test_too_few_rows():
    with pytest.raises(ValueError):
        fit_huber_lm(RegressionData(np.ones((5, 1)), np.arange(5.0)))


class TestRegressionFdr:
    def test_zero_residual_and_core(self, linear_data, linear_fit):
        fdr = regression_fdr(linear_fit, linear_data)
        assert np.all((fdr > 0) & (fdr <= 1))
        resid = linear_data.y - linear_data.X @ linear_fit.beta
        core = (resid >= -linear_fit.ka * linear_fit.scale) & (resid <= linear_fit.kb * linear_fit.scale)
        assert np.all(fdr[core] == 1.0)

    def test_planted_outlier(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=400)
        X = np.column_stack([np.ones(400), x])
        fit = RegressionFit(beta=np.array([1.0, 2.0]), scale=1.0, ka=1.5, kb=1.5,
                            loglik=0.0, converged=True)
        y = X @ fit.beta
        y[17] += 6.0
        fdr = regression_fdr(fit, RegressionData(X, y))
        p = fit.error_params
        # oracle through p0 f0 / f
        oracle = p.p0 * null_density(6.0, p) / density(6.0, p)
        assert fdr[17] == pytest.approx(oracle, rel=1e-12)
        assert fdr[17] == pytest.approx(math.exp(-(6 - 1.5) ** 2 / 2), rel=1e-12)
        assert fdr[17] == pytest.approx(4.0e-5, rel=0.01)
        assert fdr[0] == 1.0


def test_round_trip(linear_fit):
    back = RegressionFit.from_dict(linear_fit.to_dict())
    np.testing.assert_array_equal(back.beta, linear_fit.beta)
    assert back.to_dict() == linear_fit.to_dict()


def test_alternative_density_of_errors(linear_fit):
    # error model is a proper two-groups mixture as well
    p = linear_fit.error_params
    z = np.linspace(-8, 8, 101)
    np.testing.assert_allclose(p.p0 * null_density(z, p) + (1 - p.p0) * alt_density(z, p),
                               density(z, p), atol=1e-12)
