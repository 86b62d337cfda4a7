"""Independent reference implementations used by the tests.

Nothing here imports the sampler or density code paths under test; the
formulas are written out directly (often with scipy.integrate.quad or
plain loops) so agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special, stats

b = math.sqrt(2.0 / math.pi)
s = (2.0 / (4.0 - math.pi)) ** (1.0 / 3.0)


def sn_dp_pdf(y, xi, omega, lam):
    z = (y - xi) / omega
    return 2.0 / omega * stats.norm.pdf(z) * stats.norm.cdf(lam * z)


def cp_to_dp_scalar(mu, sigma2, gamma):
    c = math.copysign(abs(gamma) ** (1.0 / 3.0), gamma)
    sigma = math.sqrt(sigma2)
    xi = mu - sigma * c * s
    omega = sigma * math.sqrt(1.0 + s * s * c * c)
    lam = s * c / math.sqrt(b * b + s * s * c * c * (b * b - 1.0))
    return xi, omega, lam


def csn_pdf(y, mu, sigma2, gamma):
    return sn_dp_pdf(y, *cp_to_dp_scalar(mu, sigma2, gamma))


def mixing_pdf(family, nu, u):
    if family == "cst":
        return stats.gamma.pdf(u, nu[0] / 2.0, scale=2.0 / nu[0])
    if family == "css":
        return nu[0] * u ** (nu[0] - 1.0) if 0 < u < 1 else 0.0
    if family == "csgt":
        return stats.gamma.pdf(u, nu[0] / 2.0, scale=2.0 / nu[1])
    raise ValueError(family)


def smsn_pdf_quad(y, mu, sigma2, gamma, family, nu):
    """Hierarchy integral with scipy.integrate.quad, one y at a time."""
    if family == "csn":
        return csn_pdf(y, mu, sigma2, gamma)
    if family == "cscn":
        v1, v2 = nu
        return v1 * csn_pdf(y, mu, sigma2 / v2, gamma) + (1 - v1) * csn_pdf(y, mu, sigma2, gamma)
    hi = 1.0 if family == "css" else np.inf
    f = lambda u: csn_pdf(y, mu, sigma2 / u, gamma) * mixing_pdf(family, nu, u)
    val, _ = integrate.quad(f, 0.0, hi, epsabs=1e-13, epsrel=1e-11, limit=400)
    return val


def student_t_pdf(y, nu, mu=0.0, scale=1.0):
    return math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / (
        math.sqrt(nu * math.pi) * scale) * (1 + ((y - mu) / scale) ** 2 / nu) ** (-(nu + 1) / 2)


def gamma_from_delta(delta):
    bd = b * delta
    return (4 - math.pi) / 2 * bd ** 3 / (1 - bd * bd) ** 1.5


# ---------------------------------------------------------------- conditionals

def beta_conditional(y, X, u, h, Delta, tau, mu_b, Sigma_b):
    """Dense-matrix evaluation of Sigma* and mu*."""
    n, p = X.shape
    A = np.linalg.inv(Sigma_b)
    for i in range(n):
        A = A + u[i] * np.outer(X[i], X[i]) / tau
    cov = np.linalg.inv(A)
    rhs = np.linalg.inv(Sigma_b) @ mu_b
    for i in range(n):
        rhs = rhs + (u[i] / tau) * (y[i] - Delta * (h[i] - b) / math.sqrt(u[i])) * X[i]
    return cov @ rhs, cov


def h_conditional(r, u, Delta, tau):
    mean = [(Delta ** 2 * b + Delta * math.sqrt(ui) * ri) / (Delta ** 2 + tau) for ri, ui in zip(r, u)]
    return np.array(mean), tau / (Delta ** 2 + tau)


def Delta_conditional(r, u, h, tau, mu_D, s2_D):
    num = s2_D * sum((hi - b) * math.sqrt(ui) * ri for ri, ui, hi in zip(r, u, h)) + mu_D * tau
    den = s2_D * sum((hi - b) ** 2 for hi in h) + tau
    return num / den, tau * s2_D / den


def tau_inv_conditional(r, u, h, Delta, c, d):
    n = len(r)
    rate = d + sum(ui / 2 * (ri - Delta * (hi - b) / math.sqrt(ui)) ** 2 for ri, ui, hi in zip(r, u, h))
    return n / 2 + c, rate


def cscn_prob(r, h, Delta, tau, v1, v2):
    out = []
    for ri, hi in zip(r, h):
        p = v1 * math.sqrt(v2) * math.exp(-v2 / (2 * tau) * (ri ** 2 - 2 * Delta * (hi - b) * ri / math.sqrt(v2)))
        q = (1 - v1) * math.exp(-1 / (2 * tau) * (ri ** 2 - 2 * Delta * (hi - b) * ri))
        out.append(p / (p + q))
    return np.array(out)


# MH kernels written in their printed (untransformed) form.

def kernel_u_cst(u, r, h, Delta, tau, nu):
    return u ** ((nu + 1) / 2 - 1) * np.exp(-u / 2 * (r * r / tau + nu) + Delta * np.sqrt(u) * (h - b) * r / tau)


def kernel_u_csgt(u, r, h, Delta, tau, nu1, nu2):
    return u ** ((nu1 + 1) / 2 - 1) * np.exp(-u / 2 * (r * r / tau + nu2) + Delta * np.sqrt(u) * (h - b) * r / tau)


def kernel_u_css(u, r, h, Delta, tau, nu):
    return u ** (nu + 0.5 - 1) * np.exp(-u * r * r / (2 * tau) + np.sqrt(u) * Delta * (h - b) * r / tau)


def log_kernel_nu_cst(nu, u, lam):
    n = len(u)
    return (n * nu / 2 * np.log(nu / 2) - n * special.gammaln(nu / 2)
            + (nu / 2 - 1) * np.sum(np.log(u)) - nu * (np.sum(u) / 2 + lam))


def log_kernel_nu1_csgt(nu1, u, nu2, lam1):
    n = len(u)
    return (n * nu1 / 2 * np.log(nu2 / 2) - n * special.gammaln(nu1 / 2)
            + (nu1 / 2 - 1) * np.sum(np.log(u)) - lam1 * (nu1 - 2))


def log_kernel_nu2_cscn(v2, r_z, h_z, Delta, tau, a2, b2):
    """Contaminated-case likelihood times beta(a2, b2) prior."""
    m = len(r_z)
    quad = sum((ri - Delta * (hi - b) / np.sqrt(v2)) ** 2 for ri, hi in zip(r_z, h_z))
    return m / 2 * np.log(v2) - v2 / (2 * tau) * quad + (a2 - 1) * np.log(v2) + (b2 - 1) * np.log(1 - v2)


def log_kernel_delta_csgt(delta, r, h, u):
    n = len(r)
    k = 1 - b * b * delta ** 2
    quad = sum(ui * (ri - delta * (hi - b) / (np.sqrt(ui) * np.sqrt(k))) ** 2 for ri, hi, ui in zip(r, h, u))
    return n / 2 * np.log(k / (1 - delta ** 2)) - k / (2 * (1 - delta ** 2)) * quad


def grid_cdf(log_kernel, grid):
    """Normalized CDF on a grid by trapezoid integration of exp(log_kernel)."""
    lk = log_kernel(grid)
    w = np.exp(lk - np.max(lk))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
    return cdf / cdf[-1]


def sup_gap(draws, grid, cdf):
    """sup |F_emp - F_grid| evaluated at the grid nodes."""
    emp = np.searchsorted(np.sort(draws), grid, side="right") / len(draws)
    return float(np.max(np.abs(emp - cdf)))
