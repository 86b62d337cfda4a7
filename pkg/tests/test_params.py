import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from csmsn.errors import ParameterError, SkewnessRangeError
from csmsn.params import (B, GAMMA_MAX, GAMMA_MAX_DOC, S, CpParams, DpParams, Family, WorkParams,
                          cp_to_dp, cp_to_work, delta_from_gamma, dp_to_cp, gamma_from_delta,
                          lambda_from_gamma, work_from_delta, work_to_cp)

gammas = st.floats(-0.99, 0.99)
sigma2s = st.floats(0.01, 100.0)
mus = st.floats(-50, 50)


def test_constants():
    assert 0.797 < B < 0.798
    assert S == pytest.approx((2.0 / (4.0 - math.pi)) ** (1.0 / 3.0), rel=1e-15)
    assert 1.3256 < S < 1.3258
    assert abs(GAMMA_MAX - GAMMA_MAX_DOC) < 1e-5


def test_symmetric_case_maps_to_zero_shape():
    dp = cp_to_dp(CpParams([0.0], 1.0, 0.0))
    assert dp.xi[0] == 0.0 and dp.omega == 1.0 and dp.lam == 0.0
    cp = dp_to_cp(DpParams([0.0], 1.0, 0.0))
    assert cp.mu == 0.0 and cp.sigma2 == 1.0 and cp.gamma == 0.0


def test_gamma_09_gives_tabulated_delta():
    assert abs(cp_to_dp(CpParams([0.0], 1.0, 0.9)).delta - 0.9876) < 5e-4


def test_delta_09876_gives_gamma_09():
    assert round(float(gamma_from_delta(0.9876)), 3) == pytest.approx(0.9, abs=1e-3)
    assert float(gamma_from_delta(-0.9876)) == -float(gamma_from_delta(0.9876))
    assert float(gamma_from_delta(0.9876)) == pytest.approx(oracles.gamma_from_delta(0.9876), abs=1e-15)


@pytest.mark.parametrize("g", [GAMMA_MAX, -GAMMA_MAX, 0.996, -1.2, float("nan")])
def test_out_of_range_skewness_rejected(g):
    with pytest.raises(SkewnessRangeError):
        CpParams([0.0], 1.0, g)


def test_shape_validation():
    with pytest.raises(ParameterError):
        CpParams([0.0], 1.0, 0.0, "cst", (2.0,))
    with pytest.raises(ParameterError):
        CpParams([0.0], 1.0, 0.0, "css", (1.0,))
    with pytest.raises(ParameterError):
        CpParams([0.0], 1.0, 0.0, "cscn", (0.5, 1.0))
    with pytest.raises(ParameterError):
        CpParams([0.0], 2.0, 0.0, "csgt", (5.0, 1.0))
    with pytest.raises(ParameterError):
        CpParams([0.0], -1.0, 0.0)
    with pytest.raises(ParameterError):
        Family.parse("skew-cauchy")


def test_work_examples():
    cp = work_to_cp(WorkParams([0.0], 0.0, 1.0))
    assert cp.gamma == 0.0 and cp.sigma2 == 1.0
    w = cp_to_work(CpParams([0.0], 1.0, float(gamma_from_delta(0.5))))
    assert abs(w.delta - 0.5) < 1e-12
    D, t = work_from_delta(0.0)
    assert D == 0.0 and t == 1.0


@given(mus, sigma2s, gammas)
def test_cp_dp_roundtrip(mu, sigma2, gamma):
    p = CpParams([mu, 0.5], sigma2, gamma)
    q = dp_to_cp(cp_to_dp(p))
    assert q.beta == pytest.approx(p.beta, abs=1e-10, rel=1e-10)
    assert q.sigma2 == pytest.approx(sigma2, rel=1e-10)
    assert q.gamma == pytest.approx(gamma, abs=1e-10)


@given(mus, sigma2s, gammas)
def test_cp_dp_matches_scalar_oracle(mu, sigma2, gamma):
    dp = cp_to_dp(CpParams([mu], sigma2, gamma))
    xi, omega, lam = oracles.cp_to_dp_scalar(mu, sigma2, gamma)
    assert dp.xi[0] == pytest.approx(xi, rel=1e-12, abs=1e-12)
    assert dp.omega == pytest.approx(omega, rel=1e-12)
    assert dp.lam == pytest.approx(lam, rel=1e-12, abs=1e-15)
    assert np.sign(dp.lam) == np.sign(gamma)


@given(mus, sigma2s, gammas)
def test_cp_work_roundtrip(mu, sigma2, gamma):
    p = CpParams([mu], sigma2, gamma)
    w = cp_to_work(p)
    assert w.delta == pytest.approx(p.delta, abs=1e-12)
    assert w.sigma2 == pytest.approx(sigma2, rel=1e-10)
    q = work_to_cp(w)
    assert q.gamma == pytest.approx(gamma, abs=1e-10)


@given(st.floats(-0.999, 0.999))
def test_csgt_work_depends_on_delta_only(delta):
    D, t = work_from_delta(delta)
    assert float(D / math.sqrt(t + D * D)) == pytest.approx(delta, abs=1e-12)
    assert float(t + D * D * (1 - B * B)) == pytest.approx(1.0, abs=1e-12)


def test_gamma_to_lambda_monotone():
    g = np.linspace(-GAMMA_MAX * (1 - 1e-6), GAMMA_MAX * (1 - 1e-6), 1000)
    assert np.all(np.diff(lambda_from_gamma(g)) > 0)


@given(st.floats(-1e6, 1e6))
def test_delta_in_open_interval(lam):
    d = lam / math.sqrt(1 + lam * lam)
    assert -1 <= d <= 1
    assert abs(float(gamma_from_delta(d))) <= GAMMA_MAX + 1e-12


def test_gamma_max_is_limit():
    assert float(gamma_from_delta(1 - 1e-9)) == pytest.approx(GAMMA_MAX, abs=1e-6)
    assert float(delta_from_gamma(0.0)) == 0.0


def test_csgt_requires_unit_scale_after_dp():
    dp = cp_to_dp(CpParams([0.0], 1.0, 0.5, "csgt", (15.0, 5.0)))
    assert dp_to_cp(dp).sigma2 == 1.0
    with pytest.raises(ParameterError):
        dp_to_cp(DpParams([0.0], 2.0, 1.0, "csgt", (15.0, 5.0)))
