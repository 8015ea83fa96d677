import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparpy.errors import NonPositiveDefinite
from sparpy.simgen import (
    SETTINGS,
    CoefficientSpec,
    CovarianceSpec,
    SimulationDesign,
    active_count,
    generate,
    quadratic_form,
    round_half_up,
    sample_coefficients,
    sample_predictors,
    simulate,
)


def _spec(kind, p, seed=0, a=5):
    return CovarianceSpec.make(kind, p, rng=np.random.default_rng(seed), a=a)


def extreme_ratio_z(j, a, n=20_000, seed=0):
    """z-statistic of E[x_j y] - R E[x_inactive y] = 0 for the derived ratio R."""
    sim = simulate(SimulationDesign("extreme", "sparse", n, 20, a=a), seed)
    X, y = sim.train.X, sim.train.y - sim.train.y.mean()
    R = (j / a) * 2 ** 1.5 / math.sqrt(a + 1)
    d = X[:, j - 1] * y - R * X[:, a:].mean(axis=1) * y
    return d.mean() / (d.std(ddof=1) / math.sqrt(n))


# -- covariance structure ------------------------------------------------------

def test_independent_sample_covariance():
    X = sample_predictors(_spec("independent", 10), 5000, np.random.default_rng(1))
    C = np.cov(X, rowvar=False)
    assert np.abs(C[~np.eye(10, dtype=bool)]).max() < 0.05


def test_ar_population_entry():
    assert _spec("ar", 5).dense()[0, 2] == pytest.approx(0.81)


def test_compound_top_eigenvalue():
    spec = _spec("compound", 2000)
    v = np.ones(2000) / math.sqrt(2000)
    np.testing.assert_allclose(spec.dense() @ v, 1000.5 * v, rtol=1e-12)
    assert spec.min_eigenvalue == pytest.approx(0.5)


def test_group_blocks_absorb_remainder():
    spec = _spec("group", 250)
    assert spec.blocks() == [("compound", 0, 100), ("independent", 100, 250)]
    assert spec.partial_last_block
    spec = _spec("group", 500)
    assert [b[0] for b in spec.blocks()] == ["compound", "compound", "ar", "ar", "independent"]


def test_invalid_correlation():
    with pytest.raises(NonPositiveDefinite):
        CovarianceSpec("compound", 10, rho=1.0)
    with pytest.raises(NonPositiveDefinite):
        CovarianceSpec("compound", 10, rho=-0.2)


@pytest.mark.parametrize("kind", ["independent", "compound", "ar", "group", "extreme"])
def test_unit_variances(kind):
    # 0.06 is a per-column 3-sigma band at n = 5000, so keep the column count modest
    spec = _spec(kind, 200 if kind == "group" else 20)
    assert np.allclose(np.diag(spec.dense()), 1.0)
    X = sample_predictors(spec, 5000, np.random.default_rng(2))
    assert np.abs(X.var(axis=0, ddof=1) - 1).max() < 0.06


@pytest.mark.parametrize("kind", SETTINGS)
def test_sample_covariance_matches_dense(kind):
    spec = _spec(kind, 30, a=4)
    X = sample_predictors(spec, 40_000, np.random.default_rng(3))
    S = spec.dense()
    C = np.cov(X, rowvar=False)
    # entrywise sd of a sample covariance is sqrt((S_ii S_jj + S_ij^2) / n)
    tol = 5 * np.sqrt((np.outer(np.diag(S), np.diag(S)) + S ** 2) / 40_000)
    assert np.all(np.abs(C - S) < tol)


# -- coefficients ----------------------------------------------------------------

def test_fanlv_magnitudes_and_count():
    n, p = 200, 2000
    beta = sample_coefficients(CoefficientSpec("fanlv", 115), n, p, np.random.default_rng(4))
    nz = beta[beta != 0]
    assert nz.size == 115
    assert np.abs(nz).min() >= 4 * math.log(n) / math.sqrt(n)


def test_fanlv_sign_frequency():
    rng = np.random.default_rng(5)
    signs = np.concatenate([
        np.sign(b[b != 0]) for b in
        (sample_coefficients(CoefficientSpec("fanlv", 100), 100, 500, rng) for _ in range(100))
    ])
    assert signs.size == 10_000
    assert abs(np.mean(signs < 0) - 0.4) < 0.015


def test_example_one_and_ladder_schemes():
    b = sample_coefficients(CoefficientSpec("example_one", 10), 50, 30, np.random.default_rng(6))
    assert set(np.abs(b[:10])) <= {1.0, 2.0, 3.0} and np.all(b[10:] == 0)
    np.testing.assert_array_equal(
        sample_coefficients(CoefficientSpec("ladder", 3), 50, 6, np.random.default_rng(0)),
        [1, 2, 3, 0, 0, 0])


def test_active_counts():
    assert round_half_up(2.5) == 3 and round_half_up(2.49) == 2
    assert active_count("sparse", 200, 2000) == 15
    assert active_count("medium", 200, 2000) == 115
    assert active_count("dense", 200, 2000) == 500


# -- quadratic forms ------------------------------------------------------------

def test_quadratic_form_identity():
    assert quadratic_form(_spec("independent", 5), np.eye(5)[0]) == 1.0


def test_quadratic_form_compound():
    beta = np.zeros(8)
    beta[:2] = 1.0
    assert quadratic_form(_spec("compound", 8), beta) == pytest.approx(3.0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SETTINGS), st.integers(2, 200), st.integers(0, 10_000))
def test_quadratic_form_matches_dense(kind, p, seed):
    rng = np.random.default_rng(seed)
    spec = _spec(kind, p, seed=seed, a=max(1, min(5, p - 1)))
    beta = rng.standard_normal(p)
    S = spec.dense()
    assert quadratic_form(spec, beta) == pytest.approx(beta @ S @ beta, rel=1e-10, abs=1e-8)


def test_quadratic_form_group_all_blocks():
    spec = _spec("group", 350)
    beta = np.random.default_rng(7).standard_normal(350)
    assert quadratic_form(spec, beta) == pytest.approx(beta @ spec.dense() @ beta, rel=1e-10)


# -- generation -------------------------------------------------------------------

def test_generate_deterministic():
    a = generate("group", "medium", 50, 300, seed=11)
    b = generate("group", "medium", 50, 300, seed=11)
    np.testing.assert_array_equal(a[0].X, b[0].X)
    np.testing.assert_array_equal(a[1].y, b[1].y)


def test_generate_noise_free_limit():
    train, test = generate("ar", "sparse", 50, 100, rho_snr=1e12, seed=2)
    resid = test.y - test.truth.mu - test.X @ test.truth.beta
    assert np.abs(resid).max() < 1e-4


def test_example_one_testbed():
    sim = simulate(SimulationDesign("compound", "example_one", 200, 2000, a=100, mu=1.0), 0)
    assert sim.train.X.shape == (200, 2000) and sim.test.X.shape == (100, 2000)
    assert np.count_nonzero(sim.beta) == 100 and np.all(sim.beta[100:] == 0)
    assert sim.sigma2 == pytest.approx(quadratic_form(sim.covariance, sim.beta) / 10)


def test_empirical_snr():
    sim = simulate(SimulationDesign("ar", "medium", 5000, 300, rho_snr=10), 1)
    signal_var = np.var(sim.train.X @ sim.beta)
    assert abs(signal_var / sim.sigma2 - 10) < 1.0


def test_example_one_needs_active_count():
    with pytest.raises(ValueError):
        SimulationDesign("compound", "example_one", 20, 50).active()


@pytest.mark.parametrize("j", [1, 3, 5])
def test_extreme_correlation_ratio_derived(j):
    # companion to the acceptance check: covariance algebra of the latent
    # construction gives (j/a) 2^{3/2} (a+1)^{-1/2}
    assert abs(extreme_ratio_z(j, 5, seed=j)) < 3
