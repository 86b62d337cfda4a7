import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from csmsn.densities import logpdf
from csmsn.diagnostics import (blom_quantiles, calibrate, criteria, influential, kl_influence, log_cpo,
                               lpml, n_parameters, obs_loglik, qq_envelope, residuals)
from csmsn.mcmc import Chain, PriorSpec, RegressionData, SamplerConfig, chain_columns, run_chain
from csmsn.params import CpParams, Family, cp_to_work
from csmsn.random import simulate_errors, simulate_response

loglik_matrices = hnp.arrays(float, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12),
                             elements=st.floats(-30, 5))


def constant_chain(family, p: CpParams, M=20):
    """A chain whose every row is the point p."""
    w = cp_to_work(p)
    delta = w.delta
    row = list(p.beta) + [w.Delta, w.tau, delta, p.sigma2, p.gamma] + list(p.nu)
    cols = chain_columns(Family.parse(family), p.beta.size, PriorSpec(css_alpha2=1.0))
    if family == "cst":
        row += [0.3]
    return Chain(columns=cols, draws=np.tile(row, (M, 1)), family=Family.parse(family),
                 config=SamplerConfig(iterations=2, burn_in=1), prior=PriorSpec(), acceptance={},
                 beta_names=tuple(f"x{j}" for j in range(p.beta.size)))


def test_cpo_single_draw():
    ll = np.array([[-1.3, -0.2, -4.0]])
    np.testing.assert_allclose(log_cpo(ll), ll[0], rtol=0, atol=0)


def test_cpo_constant_likelihood():
    ll = np.full((7, 3), -2.5)
    np.testing.assert_allclose(log_cpo(ll), -2.5, atol=1e-14)


def test_cpo_harmonic_mean_example():
    ll = np.log(np.array([[1.0], [1.0 / 3.0]]))
    assert math.exp(log_cpo(ll)[0]) == pytest.approx(0.5, rel=1e-14)


@given(loglik_matrices)
def test_log_domain_matches_direct(ll):
    direct = 1.0 / np.mean(1.0 / np.exp(ll), axis=0)
    np.testing.assert_allclose(np.exp(log_cpo(ll)), direct, rtol=1e-10)
    assert lpml(ll) == pytest.approx(float(np.sum(np.log(direct))), rel=1e-10, abs=1e-10)


def test_cpo_survives_huge_negative_loglik():
    ll = np.array([[-2000.0], [-2001.0]])
    assert np.isfinite(log_cpo(ll)).all()


@given(loglik_matrices)
def test_kl_nonnegative_by_jensen(ll):
    # Harmonic <= geometric mean holds exactly for each column, so K >= 0 up to rounding.
    assert np.all(kl_influence(ll) >= -1e-9)


def test_calibration_values():
    assert float(calibrate(0.0)) == 0.5
    assert float(calibrate(0.2231436)) == pytest.approx(0.8, abs=1e-7)
    assert float(calibrate(2.0)) == pytest.approx(0.5 * (1 + math.sqrt(1 - math.exp(-4))), rel=1e-15)
    assert float(calibrate(2.0)) == pytest.approx(0.9954, abs=1e-4)
    k = np.linspace(0, 20, 500)
    p = calibrate(k)
    # Strictly increasing until the double-precision value saturates at 1.
    assert np.all(np.diff(p[k < 15]) > 0)
    assert np.all(np.diff(p) >= 0) and p[-1] == pytest.approx(1.0, abs=1e-15)


def test_constant_likelihood_has_no_influence():
    ll = np.full((10, 4), -1.7)
    np.testing.assert_allclose(kl_influence(ll), 0.0, atol=1e-14)
    np.testing.assert_allclose(calibrate(kl_influence(ll)), 0.5)
    assert influential(ll).size == 0


def test_influential_flags_an_outlying_case():
    g = np.random.default_rng(0)
    ll = g.normal(-1.0, 0.05, (400, 6))
    ll[:, 2] = g.normal(-8.0, 3.0, 400)
    assert list(influential(ll)) == [2]


def test_degenerate_chain_criteria():
    p = CpParams([1.0, 0.5], 1.3, 0.4, "cst", (6.0,))
    X = np.column_stack([np.ones(30), np.linspace(-1, 1, 30)])
    data = RegressionData(simulate_response(X, p, np.random.default_rng(1)), X)
    chain = constant_chain("cst", p)
    c = criteria(chain, data)
    assert c.pd == 0.0
    assert c.dic == c.d_at_mean
    assert c.k == 5 == n_parameters(chain)
    d_direct = -2.0 * np.sum(logpdf(data.y, p, loc=X @ p.beta))
    assert c.d_at_mean == pytest.approx(d_direct, rel=1e-10)
    assert c.eaic == pytest.approx(d_direct + 10, rel=1e-12)
    assert c.lpml == pytest.approx(-0.5 * d_direct, rel=1e-10)


def test_parameter_counts():
    for fam, nu, k in (("csn", (), 4), ("css", (3.0,), 5), ("cscn", (0.2, 0.3), 6), ("csgt", (9.0, 4.0), 5)):
        p = CpParams([0.0, 1.0], 1.0, 0.1, fam, nu)
        assert n_parameters(constant_chain(fam, p)) == k


@pytest.fixture(scope="module")
def fitted():
    g = np.random.default_rng(3)
    x = g.standard_normal(80)
    X = np.column_stack([np.ones(80), x - x.mean()])
    y = simulate_response(X, CpParams([1.0, 2.0], 1.0, 0.5, "cst", (5.0,)), g)
    data = RegressionData(y, X)
    chain = run_chain(data, "cst", config=SamplerConfig(iterations=1200, burn_in=400, thin=4, seed=2))
    return chain, data


def test_criteria_identities(fitted):
    chain, data = fitted
    ll = obs_loglik(chain, data)
    c = criteria(chain, data, ll)
    assert c.dic == pytest.approx(c.dbar + c.pd, rel=1e-12)
    assert c.ebic - c.eaic == pytest.approx(c.k * (math.log(data.n) - 2), rel=1e-12)
    assert (c.ebic >= c.eaic) == (math.log(data.n) >= 2)
    assert c.lpml == pytest.approx(lpml(ll))
    assert np.all(np.isfinite(ll)) and ll.shape == (len(chain), data.n)


def test_kl_within_monte_carlo_noise(fitted):
    chain, data = fitted
    ll = obs_loglik(chain, data)
    K = kl_influence(ll)
    se = ll.std(axis=0, ddof=1) / math.sqrt(ll.shape[0])
    assert np.all(K >= -3 * se)


@given(st.integers(2, 400), st.integers(1, 20))
def test_ebic_eaic_identity_property(n, k):
    d = 123.4
    assert (d + k * math.log(n)) - (d + 2 * k) == pytest.approx(k * (math.log(n) - 2), abs=1e-9)


def test_perfect_fit_residuals_are_zero():
    p = CpParams([1.0, -2.0], 2.0, 0.3)
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    data = RegressionData(X @ p.beta, X)
    np.testing.assert_allclose(residuals(constant_chain("csn", p), data, p), 0.0, atol=1e-15)


def test_residuals_are_standardized():
    p = CpParams([0.0, 1.0], 4.0, 0.3)
    X = np.column_stack([np.ones(3), np.arange(3.0)])
    data = RegressionData([2.0, 1.0, 2.0], X)
    np.testing.assert_allclose(residuals(constant_chain("csn", p), data, p), [1.0, 0.0, 0.0])


def test_blom_scores():
    q = blom_quantiles(5)
    np.testing.assert_allclose(q, -q[::-1], atol=1e-15)
    assert q[2] == 0.0


def test_envelope_shape_and_reproducibility():
    est = CpParams([0.0], 1.0, -0.5, "cst", (5.0,))
    r = np.random.default_rng(5).standard_normal(40)
    a = qq_envelope(r, est, n_sims=50, rng=7)
    b = qq_envelope(r, est, n_sims=50, rng=7)
    assert a.lower.shape == a.upper.shape == a.median.shape == (40,)
    assert np.all(a.lower <= a.median) and np.all(a.median <= a.upper)
    assert np.all(np.diff(a.observed) >= 0)
    assert np.array_equal(a.upper, b.upper)


def test_well_specified_envelope_coverage():
    g = np.random.default_rng(6)
    est = CpParams([0.0], 1.0, 0.6)
    r = simulate_errors(300, est, g)
    env = qq_envelope(r, est, n_sims=100, rng=g)
    assert env.fraction_inside >= 0.93
