import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

import oracles
from csmsn import densities as D
from csmsn.errors import MomentUndefinedError, ParameterError
from csmsn.params import CpParams, DpParams, cp_to_dp

SHAPES = {"csn": (), "cst": (5.0,), "css": (3.0,), "cscn": (0.5, 0.5), "csgt": (15.0, 5.0)}


def cp(family, gamma=0.0, mu=0.0, sigma2=1.0, nu=None):
    return CpParams([mu], 1.0 if family == "csgt" else sigma2, gamma, family, SHAPES[family] if nu is None else nu)


def test_csn_at_zero_is_normal():
    assert D.pdf_csn(0.0, cp("csn")) == pytest.approx(0.3989422804014327, abs=1e-15)


@pytest.mark.parametrize("family", list(SHAPES))
@pytest.mark.parametrize("gamma", [-0.9, 0.0, 0.9])
def test_normalization_and_mean(family, gamma):
    p = cp(family, gamma, mu=0.3)
    f = lambda y: float(np.exp(D.logpdf(y, p)))
    mass = sum(integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
               for a, b in ((-np.inf, 0.3), (0.3, np.inf)))
    assert mass == pytest.approx(1.0, abs=1e-6)
    mean = sum(integrate.quad(lambda y: y * f(y), a, b, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
               for a, b in ((-np.inf, 0.3), (0.3, np.inf)))
    assert mean == pytest.approx(0.3, abs=1e-5)


@pytest.mark.parametrize("family", ["cst", "css", "csgt"])
@pytest.mark.parametrize("gamma", [-0.9, -0.3, 0.0, 0.6, 0.95])
def test_display_route_equals_hierarchy(family, gamma):
    p = cp(family, gamma, mu=-0.4, sigma2=2.3)
    y = np.linspace(-8, 8, 41)
    np.testing.assert_allclose(D.logpdf(y, p), D.logpdf_hierarchy(y, p), atol=1e-7)
    ref = np.array([oracles.smsn_pdf_quad(v, -0.4, p.sigma2, gamma, family, p.nu) for v in y[::4]])
    np.testing.assert_allclose(np.exp(D.logpdf(y[::4], p)), ref, atol=1e-9, rtol=1e-7)


def test_cst_symmetric_is_student_t():
    y = np.linspace(-6, 6, 41)
    ref = [oracles.student_t_pdf(v, 5.0) for v in y]
    np.testing.assert_allclose(D.pdf_cst(y, cp("cst")), ref, atol=1e-7)
    assert D.pdf_cst(0.0, cp("cst")) == pytest.approx(math.gamma(3) / (math.sqrt(5 * math.pi) * math.gamma(2.5)))


def cst_csn_gap(gamma, nu):
    y = np.linspace(-4, 4, 801)
    return np.abs(D.pdf_cst(y, cp("cst", gamma, nu=(nu,))) - D.pdf_csn(y, cp("csn", gamma))).max()


def test_cst_large_nu_close_to_csn():
    assert cst_csn_gap(0.0, 30.0) < 5e-3
    # Skewed case: the sharper CSN peak makes the gap 0.024 at nu=30; it decays like 1/nu.
    gaps = [cst_csn_gap(-0.9, nu) for nu in (30.0, 100.0, 300.0, 1000.0)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[2] < 5e-3
    assert 300 * gaps[2] == pytest.approx(1000 * gaps[3], rel=0.1)


def test_cscn_symmetric_two_normal_mixture():
    y = np.linspace(-5, 5, 41)
    ref = 0.5 * stats.norm.pdf(y, 0, math.sqrt(1 / 0.5)) + 0.5 * stats.norm.pdf(y, 0, 1)
    np.testing.assert_allclose(D.pdf_cscn(y, cp("cscn")), ref, atol=1e-12)


def test_cscn_without_contamination_is_csn():
    y = np.linspace(-4, 4, 21)
    p = CpParams([0.0], 1.0, 0.7, "cscn", (1e-300, 0.4))
    np.testing.assert_allclose(D.pdf_cscn(y, p), D.pdf_csn(y, cp("csn", 0.7)), rtol=1e-12)


def test_css_symmetric_slash_oracle():
    y = np.linspace(-5, 5, 11)
    ref = [integrate.quad(lambda u: 3 * u**2 * stats.norm.pdf(v, 0, 1 / math.sqrt(u)), 0, 1, epsabs=1e-14)[0]
           for v in y]
    np.testing.assert_allclose(D.pdf_css(y, cp("css")), ref, atol=1e-7)


def test_symmetric_gt_matches_mixture_integral():
    y = np.linspace(-4, 4, 9)
    ref = [integrate.quad(lambda u: stats.norm.pdf(v, 0, math.sqrt(1.7 / u))
                          * stats.gamma.pdf(u, 15 / 2, scale=2 / 5), 0, np.inf, epsabs=1e-14)[0] for v in y]
    np.testing.assert_allclose(np.exp(D.logpdf_symmetric_gt(y, 0.0, 1.7, 15.0, 5.0)), ref, rtol=1e-8)
    # CSGT at gamma=0 coincides with it (sigma2 = 1).
    np.testing.assert_allclose(D.pdf_csgt(y, cp("csgt")), np.exp(D.logpdf_symmetric_gt(y, 0, 1, 15, 5)), atol=1e-7)


def test_symmetric_gt_identifiability():
    y = np.linspace(-4, 4, 17)
    a = D.logpdf_symmetric_gt(y, 0.0, 2.0, 7.0, 3.0)
    b = D.logpdf_symmetric_gt(y, 0.0, 3.0, 7.0, 2.0)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_dp_density_sn_case():
    y = np.linspace(-4, 4, 21)
    ref = oracles.sn_dp_pdf(y, 0.3, 1.4, 2.5)
    np.testing.assert_allclose(D.pdf_dp_smsn(y, DpParams([0.3], 1.4, 2.5)), ref, rtol=1e-12)
    p = cp("csn", 0.8)
    np.testing.assert_allclose(D.pdf_dp_smsn(y, cp_to_dp(p)), D.pdf_csn(y, p), rtol=1e-10)


def test_dp_density_symmetric_student_t():
    y = np.linspace(-5, 5, 21)
    ref = [oracles.student_t_pdf(v, 4.0, 0.2, 1.3) for v in y]
    np.testing.assert_allclose(D.pdf_dp_smsn(y, DpParams([0.2], 1.3, 0.0, "cst", (4.0,))), ref, atol=1e-7)


def test_dp_mixture_differs_from_cp_family_when_skewed():
    # The CP family rescales the SN location shift by u^{-1/2}; the DP mixture does not.
    y = np.linspace(-4, 4, 21)
    p = cp("cst", 0.9)
    gap = np.abs(D.pdf_dp_smsn(y, cp_to_dp(p)) - D.pdf_cst(y, p)).max()
    assert gap > 1e-2


def test_family_mismatch():
    with pytest.raises(ParameterError):
        D.pdf_cst(0.0, cp("css"))


def test_moments():
    assert D.moments(cp("cst"))[1] == pytest.approx(5 / 3)
    assert D.moments(cp("cscn"))[1] == pytest.approx(1.5)
    assert D.moments(cp("csgt"))[1] == pytest.approx(5 / 13)
    assert D.moments(cp("css", sigma2=2.0))[1] == pytest.approx(3.0)
    with pytest.raises(MomentUndefinedError):
        D.mixing_inverse_mean("cst", (1.5,))
    with pytest.raises(MomentUndefinedError):
        D.mixing_inverse_mean("css", (0.8,))
    with pytest.raises(MomentUndefinedError):
        D.mixing_inverse_mean("csgt", (2.0, 1.0))


def test_sn_moments_kurtosis():
    p = cp("csn", 0.9)
    mean, var, skew, kurt = D.sn_moments(p)
    bd = oracles.b * p.delta
    assert (mean, var, skew) == (0.0, 1.0, 0.9)
    assert kurt == pytest.approx(2 * (math.pi - 3) * bd**4 / (1 - bd**2) ** 2)
    # Compare with scipy's skewnorm excess kurtosis at the same shape.
    lam = cp_to_dp(p).lam
    assert kurt == pytest.approx(float(stats.skewnorm.stats(lam, moments="k")), rel=1e-9)


def test_far_tail_log_density_is_finite():
    lp = D.logpdf(np.array([-60.0, 60.0]), cp("csn", 0.95))
    assert np.all(np.isfinite(lp))
    lp = D.logpdf(np.array([-200.0, 200.0]), cp("cst", -0.9))
    assert np.all(np.isfinite(lp))


@settings(max_examples=25)
@given(st.sampled_from(["cst", "css", "csgt"]), st.floats(-0.95, 0.95), st.floats(-30, 30))
def test_hierarchy_agreement_property(family, gamma, y):
    p = cp(family, gamma)
    assert float(D.logpdf(y, p)) == pytest.approx(float(D.logpdf_hierarchy(y, p)), abs=1e-7)


@given(st.floats(-0.95, 0.95), st.floats(0.1, 10), st.floats(-20, 20))
def test_csn_matches_scipy_skewnorm(gamma, sigma2, y):
    p = CpParams([0.0], sigma2, gamma)
    dp = cp_to_dp(p)
    ref = stats.skewnorm.logpdf(y, dp.lam, loc=dp.xi[0], scale=dp.omega)
    assert float(D.logpdf(y, p)) == pytest.approx(ref, rel=1e-9, abs=1e-9)
