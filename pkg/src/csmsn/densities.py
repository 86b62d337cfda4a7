"""Densities and moments of the centered skew-normal scale mixtures.

The log-density is the primitive everywhere. CSN and CSCN are closed
forms; CST, CSS and CSGT are one-dimensional integrals over the mixing
variable ``u`` evaluated with the batched adaptive rule in
:mod:`csmsn.quadrature`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, log_ndtr

from csmsn.errors import MomentUndefinedError, ParameterError
from csmsn.params import B, GAMMA_MAX, S, CpParams, DpParams, Family, check_nu
from csmsn.quadrature import QuadSpec, log_integrate

LOG_2PI = math.log(2.0 * math.pi)
LOG2 = math.log(2.0)

HALF_LINE = QuadSpec(domain="positive-half-line")
UNIT = QuadSpec(domain="unit-interval")


def norm_logpdf(z):
    return -0.5 * z * z - 0.5 * LOG_2PI


def log_Phi(z):
    # scipy's log_ndtr switches to an asymptotic series in the far left tail
    return log_ndtr(z)


def _dp_of(sigma, gamma):
    """(location shift, omega, lambda) of CSN(0, sigma^2, gamma)."""
    c = np.cbrt(gamma)
    shift = -sigma * c * S
    omega = sigma * np.sqrt(1.0 + S**2 * c**2)
    lam = S * c / np.sqrt(B**2 + S**2 * c**2 * (B**2 - 1.0))
    return shift, omega, lam


def logpdf_csn_raw(y, mu, sigma2, gamma):
    """Vectorized CSN log-density; no validation, arrays broadcast."""
    sigma = np.sqrt(sigma2)
    shift, omega, lam = _dp_of(sigma, gamma)
    z = (y - mu - shift) / omega
    return LOG2 - np.log(omega) + norm_logpdf(z) + log_Phi(lam * z)


def logpdf_sn_dp(y, xi, omega, lam):
    z = (y - xi) / omega
    return LOG2 - np.log(omega) + norm_logpdf(z) + log_Phi(lam * z)


def log_mixing_density(family: Family, nu, u):
    """log g(u | nu) for the continuous mixing laws."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    if family is Family.CST:
        a = r = nu[0] / 2.0
    elif family is Family.CSGT:
        a, r = nu[0] / 2.0, nu[1] / 2.0
    elif family is Family.CSS:
        out = math.log(nu[0]) + (nu[0] - 1.0) * logu
        return np.where((u > 0) & (u < 1), out, -np.inf)
    else:
        raise ParameterError(f"{family.name} has no continuous mixing law")
    return a * math.log(r) - gammaln(a) + (a - 1.0) * logu - r * u


def _location(p, loc):
    return p.beta[0] if loc is None else np.asarray(loc, dtype=float)


def _quad(logf, shape, family):
    n = int(np.prod(shape))
    if n == 0:
        return np.zeros(shape)
    spec = UNIT if family is Family.CSS else HALF_LINE
    return log_integrate(logf, n, spec).reshape(shape)


def _integral_cp(y, mu, sigma, gamma, family, nu):
    """The explicit one-dimensional integral representation of the density."""
    c = float(np.cbrt(gamma))
    omega1 = math.sqrt(1.0 + S**2 * c**2)
    xi1 = -c * S
    lam = S * c / math.sqrt(B**2 + S**2 * c**2 * (B**2 - 1.0))
    d = ((y - mu) / (sigma * omega1)).ravel()
    r = xi1 / omega1
    if family is Family.CST:
        v = nu[0]
        a, kappa = (v + 1.0) / 2.0 - 1.0, v
        logc = LOG2 + (v / 2.0) * math.log(v / 2.0) - gammaln(v / 2.0)
    elif family is Family.CSS:
        v = nu[0]
        a, kappa = v - 0.5, 0.0
        logc = LOG2 + math.log(v)
    elif family is Family.CSGT:
        v1, v2 = nu
        a, kappa = (v1 + 1.0) / 2.0 - 1.0, v2
        logc = LOG2 + (v1 / 2.0) * math.log(v2 / 2.0) - gammaln(v1 / 2.0)
    else:
        raise ParameterError(f"{family.name} is not an integral family")
    logc += -math.log(sigma * omega1) - 0.5 * LOG_2PI - 0.5 * r * r

    def logf(u, idx):
        dd = d[idx][:, None]
        su = np.sqrt(u)
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        return (logc + a * lu - 0.5 * (u * (dd * dd + kappa) - 2.0 * su * dd * r)
                + log_Phi(lam * (su * dd - r)))

    return _quad(logf, np.shape(y - mu), family)


def logpdf_hierarchy(y, p: CpParams, loc=None):
    """log of int CSN(y; mu, sigma2/u, gamma) dG(u | nu), the mixture route."""
    y = np.asarray(y, dtype=float)
    mu = _location(p, loc)
    if p.family is Family.CSN:
        return logpdf_csn_raw(y, mu, p.sigma2, p.gamma)
    if p.family is Family.CSCN:
        return _logpdf_cscn(y, mu, p.sigma2, p.gamma, p.nu)
    yy, mm = np.broadcast_arrays(y, mu)
    yf, mf = yy.ravel(), mm.ravel()

    def logf(u, idx):
        return (logpdf_csn_raw(yf[idx][:, None], mf[idx][:, None], p.sigma2 / u, p.gamma)
                + log_mixing_density(p.family, p.nu, u))

    return _quad(logf, yy.shape, p.family)


def _logpdf_cscn(y, mu, sigma2, gamma, nu):
    v1, v2 = nu
    contaminated = math.log(v1) + logpdf_csn_raw(y, mu, sigma2 / v2, gamma) if v1 > 0 else -np.inf
    clean = math.log1p(-v1) + logpdf_csn_raw(y, mu, sigma2, gamma)
    return np.logaddexp(contaminated, clean)


def logpdf(y, p: CpParams, loc=None):
    """Log-density of ``p``'s family at ``y``.

    ``loc`` overrides the location ``p.beta[0]``; pass ``X @ beta`` for
    regression residual densities.
    """
    y = np.asarray(y, dtype=float)
    mu = _location(p, loc)
    fam = p.family
    if fam is Family.CSN:
        return logpdf_csn_raw(y, mu, p.sigma2, p.gamma)
    if fam is Family.CSCN:
        return _logpdf_cscn(y, mu, p.sigma2, p.gamma, p.nu)
    return _integral_cp(y, mu, p.sigma, p.gamma, fam, p.nu)


def _checked(p: CpParams, family: Family):
    if p.family is not family:
        raise ParameterError(f"expected {family.name} parameters, got {p.family.name}")


def pdf_csn(y, p: CpParams):
    _checked(p, Family.CSN)
    return np.exp(logpdf(y, p))


def pdf_cst(y, p: CpParams):
    _checked(p, Family.CST)
    return np.exp(logpdf(y, p))


def pdf_css(y, p: CpParams):
    _checked(p, Family.CSS)
    return np.exp(logpdf(y, p))


def pdf_cscn(y, p: CpParams):
    _checked(p, Family.CSCN)
    return np.exp(logpdf(y, p))


def pdf_csgt(y, p: CpParams):
    _checked(p, Family.CSGT)
    return np.exp(logpdf(y, p))


def logpdf_dp_smsn(y, p: DpParams, loc=None):
    """Direct-parameterization mixture: Y | u ~ SN(xi, omega^2 / u, lambda).

    Note this is not the centered family written in other coordinates
    unless lambda = 0 or there is no mixing: the centered family scales
    its location shift by ``u**-0.5`` as well.
    """
    y = np.asarray(y, dtype=float)
    xi = p.xi[0] if loc is None else np.asarray(loc, dtype=float)
    fam = p.family
    if fam is Family.CSN:
        return logpdf_sn_dp(y, xi, p.omega, p.lam)
    if fam is Family.CSCN:
        v1, v2 = p.nu
        return np.logaddexp(math.log(v1) + logpdf_sn_dp(y, xi, p.omega / math.sqrt(v2), p.lam),
                            math.log1p(-v1) + logpdf_sn_dp(y, xi, p.omega, p.lam))
    yy, xx = np.broadcast_arrays(y, xi)
    z = ((yy - xx) / p.omega).ravel()
    logc = LOG2 - math.log(p.omega)

    def logf(u, idx):
        su = np.sqrt(u)
        zz = su * z[idx][:, None]
        with np.errstate(divide="ignore"):
            half_lu = 0.5 * np.log(u)
        return (logc + half_lu + norm_logpdf(zz) + log_Phi(p.lam * zz)
                + log_mixing_density(fam, p.nu, u))

    return _quad(logf, yy.shape, fam)


def pdf_dp_smsn(y, p: DpParams):
    return np.exp(logpdf_dp_smsn(y, p))


def logpdf_symmetric_gt(y, mu, sigma2, nu1, nu2):
    """Closed-form symmetric generalized-t (normal scale mixture with gamma(nu1/2, nu2/2))."""
    z2 = (np.asarray(y, dtype=float) - mu) ** 2 / (nu2 * sigma2)
    return (gammaln((nu1 + 1.0) / 2.0) - gammaln(nu1 / 2.0)
            - 0.5 * math.log(nu2 * sigma2 * math.pi) - (nu1 + 1.0) / 2.0 * np.log1p(z2))


def mixing_inverse_mean(family, nu) -> float:
    """E(1/U), the variance inflation factor."""
    family = Family.parse(family)
    nu = tuple(float(v) for v in np.atleast_1d(nu)) if np.size(nu) else ()
    if family is Family.CSN:
        return 1.0
    if family is Family.CST:
        if not nu[0] > 2:
            raise MomentUndefinedError(f"CST variance needs nu > 2, got {nu[0]}")
        return nu[0] / (nu[0] - 2.0)
    if family is Family.CSS:
        if not nu[0] > 1:
            raise MomentUndefinedError(f"CSS variance needs nu > 1, got {nu[0]}")
        return nu[0] / (nu[0] - 1.0)
    if family is Family.CSCN:
        v1, v2 = check_nu(family, nu)
        return (v1 + v2 * (1.0 - v1)) / v2
    if not nu[0] > 2:
        raise MomentUndefinedError(f"CSGT variance needs nu1 > 2, got {nu[0]}")
    return nu[1] / (nu[0] - 2.0)


def moments(p: CpParams) -> tuple[float, float]:
    """(mean, variance) of the error law centred at ``p.mu``."""
    return p.mu, p.sigma2 * mixing_inverse_mean(p.family, p.nu)


def sn_moments(p: CpParams) -> tuple[float, float, float, float]:
    """(mean, variance, skewness, kurtosis) of a CSN law."""
    _checked(p, Family.CSN)
    bd2 = (B * p.delta) ** 2
    kurt = 2.0 * (math.pi - 3.0) * bd2**2 / (1.0 - bd2) ** 2
    return p.mu, p.sigma2, p.gamma, kurt


__all__ = [
    "GAMMA_MAX", "logpdf", "logpdf_hierarchy", "logpdf_dp_smsn", "logpdf_csn_raw",
    "pdf_csn", "pdf_cst", "pdf_css", "pdf_cscn", "pdf_csgt", "pdf_dp_smsn",
    "logpdf_symmetric_gt", "moments", "sn_moments", "mixing_inverse_mean",
    "log_mixing_density",
]
