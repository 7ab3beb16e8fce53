import math

import numpy as np
import pytest
from scipy import stats

from huberfdr import (
    HuberParams,
    PosteriorChain,
    PriorSpec,
    chain_diagnostics,
    default_prior,
    fit_mle,
    null_proportion,
    posterior_summary,
    run_chain,
    sample,
)
from huberfdr.mcmc import effective_sample_size


@pytest.fixture(scope="module")
def sim_data():
    return sample(10000, HuberParams(0, 1, 1.5, 1.5), seed=31)


@pytest.fixture(scope="module")
def chain(sim_data):
    return run_chain(sim_data, iters=20000, burnin=5000, seed=1)


def test_deterministic(sim_data):
    a = run_chain(sim_data, iters=3000, burnin=1000, seed=99)
    b = run_chain(sim_data, iters=3000, burnin=1000, seed=99)
    assert a == b
    assert np.array_equal(a.draws, b.draws)


def test_support_and_p0_column(sim_data, chain):
    prior = default_prior(sim_data)
    d = chain.draws
    assert np.all((d[:, 0] >= prior.mu_range[0]) & (d[:, 0] <= prior.mu_range[1]))
    logs = np.log(d[:, 1])
    assert np.all((logs >= prior.log_sigma_range[0]) & (logs <= prior.log_sigma_range[1]))
    assert np.all((d[:, 2:4] > prior.k_range[0]) & (d[:, 2:4] <= prior.k_range[1]))
    np.testing.assert_allclose(d[:, 4], null_proportion(d[:, 2], d[:, 3]), rtol=0, atol=1e-12)
    assert 0 < chain.acceptance_rate < 1
    assert len(chain) == 15000


def test_posterior_near_truth(chain):
    s = posterior_summary(chain)
    truth = {"mu0": 0.0, "sigma0": 1.0, "ka": 1.5, "kb": 1.5}
    for name, value in truth.items():
        assert abs(s[name]["mean"] - value) < 2 * s[name]["sd"] + 1e-12, name


def test_posterior_near_mle(sim_data, chain):
    fit = fit_mle(sim_data)
    s = posterior_summary(chain)
    for name, value in zip(("mu0", "sigma0", "ka", "kb"), fit.params.as_tuple()):
        assert abs(s[name]["mean"] - value) < 2 * s[name]["sd"], name


def test_prior_recovery_without_data():
    prior = PriorSpec(mu_range=(-1, 1), log_sigma_range=(-1, 1), k_range=(0.05, 10.0))
    ch = run_chain(np.array([]), prior=prior, iters=60000, burnin=5000, seed=3)
    # thin to roughly independent draws so the KS reference holds
    for name, ref in (("mu0", stats.uniform(-1, 2)), ("ka", stats.uniform(0.05, 9.95)),
                      ("kb", stats.uniform(0.05, 9.95))):
        x = ch.column(name)
        step = math.ceil(x.size / effective_sample_size(x))
        assert stats.kstest(x[::step], ref.cdf).pvalue > 0.01, name


def test_needs_prior_for_empty_data():
    with pytest.raises(ValueError):
        run_chain(np.array([]), iters=100, burnin=10, seed=1)


def test_bad_iteration_counts(sim_data):
    with pytest.raises(ValueError):
        run_chain(sim_data, iters=100, burnin=100, seed=1)


def test_prior_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec((1, 0), (0, 1), (0.1, 2))
    with pytest.raises(ValueError):
        PriorSpec((0, 1), (0, 1), (0.0, 2))
    with pytest.raises(ValueError):
        run_chain(np.zeros(0), PriorSpec((0, 1), (0, 1), (0.1, 20)), iters=10, burnin=1)


class TestSummary:
    def test_interval_endpoints_are_draws(self, chain):
        s = posterior_summary(chain, level=0.9)
        for j, name in enumerate(("mu0", "sigma0", "ka", "kb", "p0")):
            lo, hi = s[name]["interval"]
            col = chain.draws[:, j]
            assert lo in col and hi in col
            # inverted-cdf quantiles: smallest draw with ecdf >= q
            assert np.mean(col <= lo) >= 0.05 > np.mean(col < lo)
            assert np.mean(col <= hi) >= 0.95 > np.mean(col < hi)

    def test_degenerate_chain(self):
        draws = np.tile([0.1, 1.0, 1.5, 1.5, null_proportion(1.5, 1.5)], (2000, 1))
        ch = PosteriorChain(draws, burnin=0, acceptance_rate=0.0, seed=0)
        s = posterior_summary(ch)
        assert s["mu0"]["interval"] == (0.1, 0.1)

    def test_too_short(self):
        ch = PosteriorChain(np.zeros((10, 5)), burnin=0, acceptance_rate=0.5, seed=0)
        with pytest.raises(ValueError):
            posterior_summary(ch)

    def test_second_seed_agrees(self, sim_data, chain):
        other = run_chain(sim_data, iters=20000, burnin=5000, seed=2)
        a, b = posterior_summary(chain), posterior_summary(other)
        da, db = chain_diagnostics(chain), chain_diagnostics(other)
        for name in ("mu0", "sigma0", "ka", "kb", "p0"):
            se = math.hypot(a[name]["sd"] / math.sqrt(da["params"][name]["ess"]),
                            b[name]["sd"] / math.sqrt(db["params"][name]["ess"]))
            assert abs(a[name]["mean"] - b[name]["mean"]) < 2 * se, name


class TestDiagnostics:
    def test_iid_ess(self):
        x = np.random.default_rng(0).normal(size=20000)
        assert effective_sample_size(x) == pytest.approx(20000, rel=0.1)

    def test_ar1_ess(self):
        rng = np.random.default_rng(1)
        phi, n = 0.9, 200000
        x = np.empty(n)
        x[0] = rng.normal()
        eps = rng.normal(size=n) * math.sqrt(1 - phi ** 2)
        for t in range(1, n):
            x[t] = phi * x[t - 1] + eps[t]
        # theoretical ESS for AR(1): n (1 - phi) / (1 + phi)
        assert effective_sample_size(x) == pytest.approx(n * 0.1 / 1.9, rel=0.15)

    def test_constant_chain_degenerate(self):
        ch = PosteriorChain(np.ones((500, 5)), burnin=0, acceptance_rate=0.0, seed=0)
        d = chain_diagnostics(ch)
        assert d["params"]["mu0"]["degenerate"]
        assert d["params"]["mu0"]["ess"] is None

    def test_acceptance_recomputed(self, chain):
        assert chain_diagnostics(chain)["acceptance_rate"] == pytest.approx(chain.acceptance_rate,
                                                                            abs=1e-12)


@pytest.mark.slow
def test_posterior_concentration():
    truth = HuberParams(0, 1, 1.5, 1.5)
    small = sample(5000, truth, seed=61)
    large = sample(10000, truth, seed=62)
    sd_small = np.std(run_chain(small, iters=20000, burnin=5000, seed=4).column("mu0"))
    sd_large = np.std(run_chain(large, iters=20000, burnin=5000, seed=4).column("mu0"))
    assert 1.2 <= sd_small / sd_large <= 1.7
