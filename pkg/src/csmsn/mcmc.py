"""Metropolis-within-Gibbs sampler for CSMSN linear regression.

The sampler works on ``(beta, Delta, tau, nu)`` with half-normal latents
``h`` and mixing latents ``u``:

    y_i | u_i, h_i ~ N(x_i' beta + Delta (h_i - b) / sqrt(u_i), tau / u_i)
    h_i ~ HN(0, 1),  u_i ~ G(. | nu)

For CSGT sigma is fixed at 1, so ``Delta`` and ``tau`` are functions of
``delta`` alone and ``delta`` is sampled directly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit, gammaln

from csmsn.errors import ConfigError, CsmsnError, DataError, NumericError, ParameterError
from csmsn.params import (B, CpParams, Family, delta_from_work, gamma_from_delta,
                          sigma2_from_work, work_from_delta)
from csmsn.random import RngStream, as_generator, sample_truncated_gamma, sample_truncated_normal


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters; ``None`` for beta means N(0, 100 I)."""

    mu_beta: tuple | None = None
    Sigma_beta: tuple | None = None
    mu_Delta: float = 0.0
    sigma2_Delta: float = 100.0
    c: float = 0.01
    d: float = 0.01
    # CST nu | lambda ~ exp(lambda) on (2, inf), lambda ~ U(rho0, rho1); also CSGT nu1.
    rho0: float = 0.02
    rho1: float = 0.49
    # CSS nu ~ gamma(alpha1, alpha2) on (1, inf); alpha2=None puts U(theta_lo, theta_hi) on the rate.
    css_alpha1: float = 1.0
    css_alpha2: float | None = None
    theta_lo: float = 0.02
    theta_hi: float = 0.99
    # CSCN nu1 ~ beta(alpha1, beta1), nu2 ~ beta(alpha2, beta2).
    cscn_alpha1: float = 1.0
    cscn_beta1: float = 1.0
    cscn_alpha2: float = 1.0
    cscn_beta2: float = 1.0
    # CSGT nu2 | lambda2 ~ exp(lambda2), lambda2 ~ U(psi0, psi1).
    psi0: float = 0.02
    psi1: float = 0.49

    def __post_init__(self):
        if not (0 < self.rho0 < self.rho1):
            raise ConfigError("need 0 < rho0 < rho1")
        if not (0 < self.psi0 < self.psi1):
            raise ConfigError("need 0 < psi0 < psi1")
        if not (0 < self.theta_lo < self.theta_hi):
            raise ConfigError("need 0 < theta_lo < theta_hi")
        if not (self.c > 0 and self.d > 0 and self.sigma2_Delta > 0):
            raise ConfigError("c, d and sigma2_Delta must be positive")
        if self.css_alpha2 is None and self.css_alpha1 != 1.0:
            raise ConfigError("a hierarchical CSS rate needs css_alpha1 = 1 (exponential prior)")
        if self.css_alpha2 is not None and self.css_alpha2 <= 0:
            raise ConfigError("css_alpha2 must be positive")
        for name in ("cscn_alpha1", "cscn_beta1", "cscn_alpha2", "cscn_beta2", "css_alpha1"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def beta_prior(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        mu = np.zeros(p) if self.mu_beta is None else np.asarray(self.mu_beta, dtype=float)
        Sigma = 100.0 * np.eye(p) if self.Sigma_beta is None else np.asarray(self.Sigma_beta, dtype=float)
        if mu.shape != (p,) or Sigma.shape != (p, p):
            raise ConfigError(f"beta prior must have dimension {p}")
        try:
            np.linalg.cholesky(Sigma)
        except np.linalg.LinAlgError:
            raise ConfigError("Sigma_beta must be positive definite") from None
        return mu, Sigma

    def resolved(self, p: int) -> "PriorSpec":
        mu, Sigma = self.beta_prior(p)
        return dataclasses.replace(self, mu_beta=tuple(mu.tolist()),
                                   Sigma_beta=tuple(map(tuple, Sigma.tolist())))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown prior keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("mu_beta", "Sigma_beta"):
            if d.get(key) is not None:
                v = d[key]
                d[key] = tuple(tuple(r) for r in v) if key == "Sigma_beta" else tuple(v)
        return cls(**d)


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 60000
    burn_in: int = 20000
    thin: int = 40
    n_chains: int = 1
    seed: int = 0
    adapt_window: int = 50
    target_accept: float = 0.44
    keep_latent: bool = False

    def __post_init__(self):
        if not (0 <= self.burn_in < self.iterations):
            raise ConfigError("need 0 <= burn_in < iterations")
        if self.thin < 1 or self.n_chains < 1 or self.adapt_window < 1:
            raise ConfigError("thin, n_chains and adapt_window must be >= 1")
        if not 0 < self.target_accept < 1:
            raise ConfigError("target_accept must lie in (0, 1)")

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown sampler keys: {sorted(unknown)}")
        return cls(**d)


DESK = dict(iterations=6000, burn_in=2000, thin=4)


# --------------------------------------------------------------------------
# data and state

@dataclass(frozen=True)
class RegressionData:
    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("data contain missing or non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        names = tuple(self.names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError("one name per design column is required")
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def check_rank(self):
        if self.n < self.p:
            raise DataError(f"n = {self.n} observations for p = {self.p} coefficients")
        if self.p and np.linalg.matrix_rank(self.X) < self.p:
            raise DataError("design matrix is rank deficient")


@dataclass
class LatentState:
    h: np.ndarray
    u: np.ndarray
    z: np.ndarray | None = None          # CSCN contamination indicators
    lambda_hyper: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class GibbsState:
    beta: np.ndarray
    Delta: float
    tau: float
    nu: np.ndarray
    latent: LatentState
    delta: float = 0.0                     # sampled directly for CSGT only

    @property
    def h(self):
        return self.latent.h

    @property
    def u(self):
        return self.latent.u

    def copy(self) -> "GibbsState":
        lat = self.latent
        return GibbsState(self.beta.copy(), self.Delta, self.tau, self.nu.copy(),
                          LatentState(lat.h.copy(), lat.u.copy(),
                                      None if lat.z is None else lat.z.copy(),
                                      lat.lambda_hyper.copy()),
                          self.delta)


HYPER_NAMES = {
    Family.CST: ("lambda",), Family.CSS: ("theta",), Family.CSGT: ("lambda1", "lambda2"),
    Family.CSN: (), Family.CSCN: (),
}


def hyper_names(family: Family, prior: PriorSpec) -> tuple[str, ...]:
    if family is Family.CSS and prior.css_alpha2 is not None:
        return ()
    return HYPER_NAMES[family]


# --------------------------------------------------------------------------
# Metropolis helpers

class Transform:
    """Bijection from the real line onto a parameter's support."""

    def __init__(self, kind: str, lower: float = 0.0):
        self.kind, self.lower = kind, lower

    def forward(self, eta):
        if self.kind == "log":
            return self.lower + np.exp(eta)
        if self.kind == "logit":
            return expit(eta)
        return np.tanh(eta)

    def inverse(self, x):
        if self.kind == "log":
            return np.log(x - self.lower)
        if self.kind == "logit":
            return np.log(x) - np.log1p(-x)
        return np.arctanh(x)

    def log_jacobian(self, eta, x):
        if self.kind == "log":
            return eta
        if self.kind == "logit":
            return np.log(x) + np.log1p(-x)
        return np.log1p(-x * x)


class AdaptiveStep:
    """Random-walk scale with Robbins-Monro adaptation towards a target rate."""

    def __init__(self, size=None, init=0.5, target=0.44, window=50):
        self.log_step = np.full(size, math.log(init)) if size is not None else math.log(init)
        self.target, self.window = target, window
        self.accepted = 0.0
        self.proposed = 0

    @property
    def step(self):
        return np.exp(self.log_step)

    def update(self, accepted, iteration: int, adapting: bool):
        if adapting:
            gain = (1.0 + iteration / self.window) ** -0.6
            self.log_step = self.log_step + gain * (np.asarray(accepted, dtype=float) - self.target)
        else:
            self.accepted += float(np.sum(accepted))
            self.proposed += int(np.size(accepted))

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def rw_step(x, log_target, transform: Transform, step, rng):
    """One random-walk MH step on the transformed scale, elementwise over arrays.

    ``log_target`` is the log-kernel on the original scale. Returns the new
    values and the acceptance indicators.
    """
    x = np.asarray(x, dtype=float)
    eta = transform.inverse(x)
    prop_eta = eta + step * rng.standard_normal(np.shape(x))
    prop = transform.forward(prop_eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        cur = log_target(x) + transform.log_jacobian(eta, x)
        new = log_target(prop) + transform.log_jacobian(prop_eta, prop)
        log_ratio = new - cur
    acc = np.log(rng.random(np.shape(x))) < np.where(np.isnan(log_ratio), -np.inf, log_ratio)
    return np.where(acc, prop, x), acc


# --------------------------------------------------------------------------
# full conditionals

def residuals(state: GibbsState, data: RegressionData):
    return data.y - data.X @ state.beta


def beta_conditional(state: GibbsState, data: RegressionData, prior: PriorSpec):
    """(mean, covariance) of beta | rest."""
    mu_b, Sigma_b = prior.beta_prior(data.p)
    prec_b = np.linalg.inv(Sigma_b)
    u, h = state.u, state.h
    w = u / state.tau
    prec = (data.X * w[:, None]).T @ data.X + prec_b
    target = data.y - state.Delta * (h - B) / np.sqrt(u)
    rhs = data.X.T @ (w * target) + prec_b @ mu_b
    try:
        cov = np.linalg.inv(prec)
        np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        raise NumericError("beta precision matrix is not positive definite") from None
    return cov @ rhs, cov


def cond_beta(state, data, prior, rng):
    mean, cov = beta_conditional(state, data, prior)
    chol = np.linalg.cholesky(cov)
    return mean + chol @ rng.standard_normal(mean.size)


def h_conditional(state: GibbsState, data: RegressionData):
    """(mean, variance) vectors of the truncated normals for h."""
    r = residuals(state, data)
    D2 = state.Delta**2
    mean = (D2 * B + state.Delta * np.sqrt(state.u) * r) / (D2 + state.tau)
    var = np.full_like(mean, state.tau / (D2 + state.tau))
    return mean, var


def cond_h(state, data, rng):
    mean, var = h_conditional(state, data)
    return sample_truncated_normal(mean, var, 0.0, np.inf, rng)


def cscn_u_probability(state: GibbsState, data: RegressionData):
    """P(u_i = nu2 | rest) for the contaminated normal."""
    v1, v2 = state.nu
    r = residuals(state, data)
    hb = state.h - B
    tau, D = state.tau, state.Delta
    log_p = (math.log(v1) + 0.5 * math.log(v2)
             - v2 / (2.0 * tau) * (r * r - 2.0 * D / math.sqrt(v2) * hb * r))
    log_q = math.log1p(-v1) - 1.0 / (2.0 * tau) * (r * r - 2.0 * D * hb * r)
    return expit(log_p - log_q)


def u_log_kernel(family: Family, state: GibbsState, data: RegressionData, idx=None):
    """Vectorized log-kernel of u_i | rest for CST, CSS and CSGT."""
    r = residuals(state, data)
    hb = state.h - B
    if idx is not None:
        r, hb = r[idx], hb[idx]
    tau, D = state.tau, state.Delta
    if family is Family.CST:
        power, kappa = (state.nu[0] + 1.0) / 2.0 - 1.0, state.nu[0]
    elif family is Family.CSGT:
        power, kappa = (state.nu[0] + 1.0) / 2.0 - 1.0, state.nu[1]
    elif family is Family.CSS:
        power, kappa = state.nu[0] + 0.5 - 1.0, 0.0
    else:
        raise ParameterError(f"no u kernel for {family.name}")
    quad = r * r / tau + kappa
    lin = D * hb * r / tau

    def log_kernel(u):
        return power * np.log(u) - 0.5 * u * quad + np.sqrt(u) * lin

    return log_kernel


U_TRANSFORM = {Family.CST: Transform("log"), Family.CSGT: Transform("log"),
               Family.CSS: Transform("logit")}


def cond_u(state, data, family, rng, step=None):
    """Draw u (and CSCN indicators). Returns (u, z, acceptance-or-None)."""
    family = Family.parse(family)
    if family is Family.CSN:
        return np.ones(data.n), None, None
    if family is Family.CSCN:
        prob = cscn_u_probability(state, data)
        z = rng.random(data.n) < prob
        return np.where(z, state.nu[1], 1.0), z, None
    log_kernel = u_log_kernel(family, state, data)
    s = 1.0 if step is None else step
    u, acc = rw_step(state.u, log_kernel, U_TRANSFORM[family], s, rng)
    return u, None, acc


def Delta_conditional(state: GibbsState, data: RegressionData, prior: PriorSpec):
    r = residuals(state, data)
    hb = state.h - B
    s2 = prior.sigma2_Delta
    denom = s2 * np.sum(hb * hb) + state.tau
    mean = (s2 * np.sum(hb * np.sqrt(state.u) * r) + prior.mu_Delta * state.tau) / denom
    var = state.tau * s2 / denom
    return mean, var


def cond_Delta(state, data, prior, rng):
    mean, var = Delta_conditional(state, data, prior)
    return mean + math.sqrt(var) * rng.standard_normal()


def tau_inv_conditional(state: GibbsState, data: RegressionData, prior: PriorSpec):
    """(shape, rate) of the gamma law of 1/tau."""
    r = residuals(state, data)
    e = np.sqrt(state.u) * r - state.Delta * (state.h - B)
    return data.n / 2.0 + prior.c, prior.d + 0.5 * np.sum(e * e)


def cond_tau_inv(state, data, prior, rng):
    shape, rate = tau_inv_conditional(state, data, prior)
    return rng.gamma(shape, 1.0 / rate)


def csgt_delta_log_kernel(state: GibbsState, data: RegressionData):
    """log-kernel of delta | rest for CSGT (sigma = 1), uniform prior on (-1, 1)."""
    r = residuals(state, data)
    hb = state.h - B
    su = np.sqrt(state.u)
    n = data.n
    a_rr = np.sum(state.u * r * r)
    a_rh = np.sum(su * r * hb)
    a_hh = np.sum(hb * hb)

    def log_kernel(delta):
        delta = np.asarray(delta, dtype=float)
        Delta, tau = work_from_delta(delta)
        quad = a_rr - 2.0 * Delta * a_rh + Delta**2 * a_hh
        return -0.5 * n * np.log(tau) - 0.5 * quad / tau

    return log_kernel


def cond_delta_csgt(state, data, rng, step=1.0):
    kern = csgt_delta_log_kernel(state, data)
    new, acc = rw_step(np.array([state.delta]), kern, Transform("atanh"), step, rng)
    return float(new[0]), bool(acc[0])


def cst_nu_log_kernel(u, lam):
    n, slog, su = u.size, np.sum(np.log(u)), np.sum(u)

    def log_kernel(nu):
        nu = np.asarray(nu, dtype=float)
        half = nu / 2.0
        return n * (half * np.log(half) - gammaln(half)) + (half - 1.0) * slog - nu * (su / 2.0 + lam)

    return log_kernel


def csgt_nu1_log_kernel(u, nu2, lam1):
    n, slog = u.size, np.sum(np.log(u))

    def log_kernel(nu1):
        nu1 = np.asarray(nu1, dtype=float)
        half = nu1 / 2.0
        return n * (half * math.log(nu2 / 2.0) - gammaln(half)) + (half - 1.0) * slog - lam1 * (nu1 - 2.0)

    return log_kernel


def cscn_nu2_log_kernel(state: GibbsState, data: RegressionData, prior: PriorSpec):
    """log-kernel of nu2 | indicators, rest: contaminated-case likelihood times beta prior."""
    z = state.latent.z
    r = residuals(state, data)[z]
    hb = (state.h - B)[z]
    m = int(np.sum(z))
    s_rr = float(np.sum(r * r))
    s_hr = float(np.sum(hb * r))
    tau, D = state.tau, state.Delta

    def log_kernel(v2):
        v2 = np.asarray(v2, dtype=float)
        return (0.5 * m * np.log(v2) - v2 * s_rr / (2.0 * tau) + np.sqrt(v2) * D * s_hr / tau
                + (prior.cscn_alpha2 - 1.0) * np.log(v2) + (prior.cscn_beta2 - 1.0) * np.log1p(-v2))

    return log_kernel


def css_nu_conditional(u, rate_alpha2, prior: PriorSpec):
    """(shape, rate) of the gamma law of nu | rest truncated to (1, inf)."""
    slog = float(np.sum(np.log(u)))
    rate = rate_alpha2 - slog
    if not rate > 0:
        raise NumericError("CSS nu rate must be positive (u_i < 1 implies -log u_i > 0)")
    return u.size + prior.css_alpha1, rate


def cscn_nu1_conditional(z, prior: PriorSpec):
    """beta parameters of nu1 | indicators."""
    m = int(np.sum(z))
    return m + prior.cscn_alpha1, z.size - m + prior.cscn_beta1


def csgt_nu2_conditional(u, nu1, lam2):
    return u.size * nu1 / 2.0 + 1.0, float(np.sum(u)) / 2.0 + lam2


def hyper_conditionals(state: GibbsState, family: Family, prior: PriorSpec) -> list[tuple]:
    """(shape, rate, lower, upper) of each truncated-gamma hyper-rate given nu."""
    nu = state.nu
    if family is Family.CST:
        return [(2.0, nu[0] - 2.0, prior.rho0, prior.rho1)]
    if family is Family.CSS and prior.css_alpha2 is None:
        return [(2.0, nu[0] - 1.0, prior.theta_lo, prior.theta_hi)]
    if family is Family.CSGT:
        return [(2.0, nu[0] - 2.0, prior.rho0, prior.rho1), (2.0, nu[1], prior.psi0, prior.psi1)]
    return []


def _draw_hypers(state, family, prior, rng):
    return np.array([sample_truncated_gamma(k, r, lo, hi, rng)
                     for k, r, lo, hi in hyper_conditionals(state, family, prior)])


def cond_nu(state, family, prior, rng, steps=None, data=None):
    """Update nu and its hyper-rates in place. Returns {block: acceptance}."""
    family = Family.parse(family)
    lat = state.latent
    acc = {}
    steps = steps or {}
    if family is Family.CST:
        kern = cst_nu_log_kernel(lat.u, lat.lambda_hyper[0])
        new, a = rw_step(state.nu[:1], kern, Transform("log", 2.0), steps.get("nu", 1.0), rng)
        state.nu = new
        acc["nu"] = a
        lat.lambda_hyper = _draw_hypers(state, family, prior, rng)
    elif family is Family.CSS:
        rate_alpha2 = prior.css_alpha2 if prior.css_alpha2 is not None else lat.lambda_hyper[0]
        shape, rate = css_nu_conditional(lat.u, rate_alpha2, prior)
        state.nu = np.array([sample_truncated_gamma(shape, rate, 1.0, np.inf, rng)])
        lat.lambda_hyper = _draw_hypers(state, family, prior, rng)
    elif family is Family.CSCN:
        a1, b1 = cscn_nu1_conditional(lat.z, prior)
        v1 = rng.beta(a1, b1)
        kern = cscn_nu2_log_kernel(state, data, prior)
        new, a = rw_step(state.nu[1:2], kern, Transform("logit"), steps.get("nu2", 1.0), rng)
        acc["nu2"] = a
        state.nu = np.array([v1, new[0]])
        lat.u = np.where(lat.z, state.nu[1], 1.0)
    elif family is Family.CSGT:
        lam1, lam2 = lat.lambda_hyper
        kern = csgt_nu1_log_kernel(lat.u, state.nu[1], lam1)
        new, a = rw_step(state.nu[:1], kern, Transform("log", 2.0), steps.get("nu1", 1.0), rng)
        acc["nu1"] = a
        nu1 = float(new[0])
        shape, rate = csgt_nu2_conditional(lat.u, nu1, lam2)
        nu2 = rng.gamma(shape, 1.0 / rate)
        state.nu = np.array([nu1, nu2])
        lat.lambda_hyper = _draw_hypers(state, family, prior, rng)
    return acc


# --------------------------------------------------------------------------
# chain runner

def initial_state(data: RegressionData, family: Family, prior: PriorSpec) -> GibbsState:
    beta, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    resid = data.y - data.X @ beta
    dof = max(data.n - data.p, 1)
    tau = max(float(resid @ resid) / dof, 1e-8)
    lat = LatentState(h=np.full(data.n, B), u=np.ones(data.n))
    ln2 = math.log(2.0)
    rho_mid = 0.5 * (prior.rho0 + prior.rho1)
    if family is Family.CST:
        nu = np.array([2.0 + ln2 / rho_mid])
        lat.lambda_hyper = np.array([rho_mid])
    elif family is Family.CSS:
        theta = prior.css_alpha2 if prior.css_alpha2 is not None else 0.5 * (prior.theta_lo + prior.theta_hi)
        nu = np.array([1.0 + ln2 / theta])
        # u lives on (0, 1); start at the median of beta(nu, 1).
        lat.u = np.full(data.n, 0.5 ** (1.0 / nu[0]))
        if prior.css_alpha2 is None:
            lat.lambda_hyper = np.array([theta])
    elif family is Family.CSCN:
        nu = np.array([stats.beta.median(prior.cscn_alpha1, prior.cscn_beta1),
                       stats.beta.median(prior.cscn_alpha2, prior.cscn_beta2)])
        lat.z = np.zeros(data.n, dtype=bool)
    elif family is Family.CSGT:
        psi_mid = 0.5 * (prior.psi0 + prior.psi1)
        nu = np.array([2.0 + ln2 / rho_mid, ln2 / psi_mid])
        lat.lambda_hyper = np.array([rho_mid, psi_mid])
        tau = 1.0
    else:
        nu = np.zeros(0)
    return GibbsState(beta=beta, Delta=0.0, tau=tau, nu=nu, latent=lat, delta=0.0)


def chain_columns(family: Family, p: int, prior: PriorSpec) -> tuple[str, ...]:
    return (tuple(f"beta_{j}" for j in range(p))
            + ("Delta", "tau", "delta", "sigma2", "gamma")
            + family.nu_names + hyper_names(family, prior))


@dataclass(frozen=True)
class Chain:
    """Retained draws (rows) with derived centered columns."""

    columns: tuple[str, ...]
    draws: np.ndarray
    family: Family
    config: SamplerConfig
    prior: PriorSpec
    acceptance: dict
    beta_names: tuple[str, ...]
    seed: int = 0
    chain_id: np.ndarray | None = None
    latent_h: np.ndarray | None = None
    latent_u: np.ndarray | None = None

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)
        ids = np.zeros(draws.shape[0], dtype=int) if self.chain_id is None else np.asarray(self.chain_id, dtype=int)
        object.__setattr__(self, "chain_id", ids)

    def __len__(self):
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.columns.index(name)]

    @property
    def n_beta(self) -> int:
        return len(self.beta_names)

    @property
    def beta(self) -> np.ndarray:
        return self.draws[:, :self.n_beta]

    @property
    def nu(self) -> np.ndarray:
        return np.column_stack([self.column(c) for c in self.family.nu_names]) if self.family.nu_dim \
            else np.zeros((len(self), 0))

    def cp_params(self, row: int) -> CpParams:
        sigma2 = 1.0 if self.family.fixed_scale else float(self.column("sigma2")[row])
        return CpParams(beta=self.beta[row], sigma2=sigma2, gamma=float(self.column("gamma")[row]),
                        family=self.family, nu=tuple(self.nu[row]))


def _record(state: GibbsState, family: Family, prior: PriorSpec) -> list[float]:
    delta = float(delta_from_work(state.Delta, state.tau))
    sigma2 = 1.0 if family.fixed_scale else float(sigma2_from_work(state.Delta, state.tau))
    row = list(state.beta) + [state.Delta, state.tau, delta, sigma2, float(gamma_from_delta(delta))]
    row += list(state.nu)
    if hyper_names(family, prior):
        row += list(state.latent.lambda_hyper)
    return row


def gibbs_sweep(state: GibbsState, data: RegressionData, family: Family, prior: PriorSpec, gen,
                u_step: AdaptiveStep | None = None, steps: dict | None = None, it: int = 0,
                adapting: bool = False) -> GibbsState:
    """One full update in the order beta, h, u, (Delta, 1/tau) or delta, nu and hypers."""
    try:
        with np.errstate(invalid="ignore"):
            return _sweep(state, data, family, prior, gen, u_step, steps, it, adapting)
    except NumericError as err:
        if err.iteration is None:
            raise NumericError(f"{err} (iteration {it})", err.error_estimate, it) from err
        raise
    except CsmsnError:
        raise
    except (FloatingPointError, np.linalg.LinAlgError, ValueError) as err:
        raise NumericError(f"{err} (iteration {it})", iteration=it) from err


def _sweep(state, data, family, prior, gen, u_step, steps, it, adapting):
    steps = steps if steps is not None else {}
    state.beta = cond_beta(state, data, prior, gen)
    state.latent.h = cond_h(state, data, gen)
    u, z, acc = cond_u(state, data, family, gen, None if u_step is None else u_step.step)
    state.latent.u = u
    if z is not None:
        state.latent.z = z
    if acc is not None and u_step is not None:
        u_step.update(acc, it, adapting)
    if family is Family.CSGT:
        step = steps["delta"].step if "delta" in steps else 0.1
        state.delta, a = cond_delta_csgt(state, data, gen, step)
        if "delta" in steps:
            steps["delta"].update(a, it, adapting)
        D, t = work_from_delta(state.delta)
        state.Delta, state.tau = float(D), float(t)
    else:
        state.Delta = cond_Delta(state, data, prior, gen)
        state.tau = 1.0 / cond_tau_inv(state, data, prior, gen)
    if family is not Family.CSN:
        accs = cond_nu(state, family, prior, gen, {k: s.step for k, s in steps.items()}, data)
        for k, a in accs.items():
            if k in steps:
                steps[k].update(a, it, adapting)
    if not (np.all(np.isfinite(state.beta)) and math.isfinite(state.Delta)
            and math.isfinite(state.tau) and state.tau > 0 and np.all(np.isfinite(state.nu))):
        raise NumericError(f"non-finite state at iteration {it}", iteration=it)
    return state


def run_chain(data: RegressionData, family, prior: PriorSpec | None = None,
              config: SamplerConfig | None = None, rng=None, init: GibbsState | None = None) -> Chain:
    """Run one Metropolis-within-Gibbs chain and return the thinned draws."""
    family = Family.parse(family)
    prior = (prior or PriorSpec()).resolved(data.p)
    config = config or SamplerConfig()
    data.check_rank()
    if rng is None:
        rng = RngStream(config.seed, 0)
    stream = rng if isinstance(rng, RngStream) else None
    gen = as_generator(rng)

    state = init.copy() if init is not None else initial_state(data, family, prior)
    window, target = config.adapt_window, config.target_accept
    u_step = AdaptiveStep(data.n, 1.0, target, window) if family in U_TRANSFORM else None
    blocks = {"cst": ["nu"], "cscn": ["nu2"], "csgt": ["nu1", "delta"]}.get(family.value, [])
    steps = {b: AdaptiveStep(None, 0.5 if b != "delta" else 0.1, target, window) for b in blocks}

    rows, hs, us = [], [], []
    for it in range(config.iterations):
        adapting = it < config.burn_in
        gibbs_sweep(state, data, family, prior, gen, u_step, steps, it, adapting)
        if not adapting and (it - config.burn_in + 1) % config.thin == 0:
            rows.append(_record(state, family, prior))
            if config.keep_latent:
                hs.append(state.latent.h.copy())
                us.append(state.latent.u.copy())

    acceptance = {}
    if u_step is not None:
        acceptance["u"] = u_step.rate
    for k, s in steps.items():
        acceptance[k] = s.rate
    return Chain(columns=chain_columns(family, data.p, prior), draws=np.array(rows).reshape(len(rows), -1),
                 family=family, config=config, prior=prior, acceptance=acceptance,
                 beta_names=data.names, seed=config.seed if stream is None else stream.seed,
                 latent_h=np.array(hs) if hs else None, latent_u=np.array(us) if us else None)


def _chain_worker(args):
    data, family, prior, config, stream = args
    return run_chain(data, family, prior, config, stream)


def run_chains(data, family, prior=None, config=None, workers: int = 1) -> Chain:
    """Run ``config.n_chains`` chains on independent streams and pool them."""
    from csmsn.parallel import map_jobs

    config = config or SamplerConfig()
    jobs = [(data, family, prior, config, RngStream(config.seed, k)) for k in range(config.n_chains)]
    chains = map_jobs(_chain_worker, jobs, workers)
    return pool_chains(chains)


def pool_chains(chains: list[Chain]) -> Chain:
    if len(chains) == 1:
        return chains[0]
    first = chains[0]
    acc = {k: float(np.nanmean([c.acceptance[k] for c in chains])) for k in first.acceptance}
    return dataclasses.replace(
        first, draws=np.vstack([c.draws for c in chains]), acceptance=acc,
        chain_id=np.concatenate([np.full(len(c), i) for i, c in enumerate(chains)]),
        latent_h=None, latent_u=None)


# --------------------------------------------------------------------------
# summaries

TABLE_POLICY = {
    Family.CST: {"beta": "median", "sigma2": "mean", "delta": "median", "nu": "mode"},
    Family.CSS: {"beta": "median", "sigma2": "mean", "delta": "mean", "nu": "mode"},
    Family.CSCN: {"beta": "median", "sigma2": "mean", "delta": "mode", "nu1": "mean", "nu2": "mode"},
    Family.CSGT: {"beta": "median", "delta": "median", "nu1": "median", "nu2": "median"},
    Family.CSN: {"beta": "median", "sigma2": "mean", "delta": "median"},
}


def default_policy(family) -> dict:
    pol = dict(TABLE_POLICY[Family.parse(family)])
    pol["gamma"] = pol["delta"]
    return pol


def posterior_mode(x) -> float:
    """Argmax of a Gaussian kernel density estimate."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return float(x[0])
    kde = stats.gaussian_kde(x)
    grid = np.linspace(lo, hi, 1024)
    dens = kde(grid)
    j = int(np.argmax(dens))
    # Parabolic refinement around the grid maximum.
    if 0 < j < grid.size - 1:
        y0, y1, y2 = dens[j - 1:j + 2]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            return float(grid[j] + 0.5 * (y0 - y2) / denom * (grid[1] - grid[0]))
    return float(grid[j])


STATISTICS = {"mean": lambda x: float(np.mean(x)), "median": lambda x: float(np.median(x)),
              "mode": posterior_mode}


@dataclass(frozen=True)
class ParamSummary:
    name: str
    estimate: float
    statistic: str
    sd: float
    lower: float
    upper: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def summarize(chain: Chain, statistic_policy: dict | None = None, level: float = 0.95) -> dict:
    """Point estimate (per policy), SD and equal-tail interval for every column."""
    if len(chain) == 0:
        raise ValueError("empty chain")
    policy = default_policy(chain.family)
    if statistic_policy:
        policy.update(statistic_policy)
    out = {}
    alpha = (1.0 - level) / 2.0
    for j, name in enumerate(chain.columns):
        x = chain.draws[:, j]
        key = "beta" if name.startswith("beta_") and name not in policy else name
        stat = policy.get(key, "mean")
        lo, hi = np.quantile(x, [alpha, 1.0 - alpha])
        out[name] = ParamSummary(name, STATISTICS[stat](x), stat, float(np.std(x, ddof=1)) if x.size > 1 else 0.0,
                                 float(lo), float(hi))
    return out


def point_estimate(chain: Chain, summaries: dict | None = None) -> CpParams:
    """CpParams assembled from the per-policy summaries."""
    s = summaries or summarize(chain)
    beta = [s[f"beta_{j}"].estimate for j in range(chain.n_beta)]
    sigma2 = 1.0 if chain.family.fixed_scale else s["sigma2"].estimate
    nu = tuple(s[n].estimate for n in chain.family.nu_names)
    return CpParams(beta=beta, sigma2=sigma2, gamma=s["gamma"].estimate, family=chain.family, nu=nu)


# --------------------------------------------------------------------------
# persistence

CHAIN_FORMAT = "%.17g"


def _clean(obj):
    """JSON-safe copy: NaN becomes null, arrays become lists."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def save_chain(chain: Chain, path, extra: dict | None = None):
    """Write draws to ``path`` (CSV, exact round-trip) and metadata to ``path`` + '.json'."""
    import json

    header = ",".join(("chain",) + chain.columns)
    table = np.column_stack([chain.chain_id.astype(float), chain.draws])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt=CHAIN_FORMAT)
    meta = dict(family=chain.family.value, columns=list(chain.columns), beta_names=list(chain.beta_names),
                config=chain.config.to_dict(), prior=chain.prior.to_dict(), acceptance=chain.acceptance,
                seed=chain.seed)
    if extra:
        meta.update(extra)
    with open(f"{path}.json", "w") as fh:
        json.dump(_clean(meta), fh, indent=2, sort_keys=True)


def load_chain(path) -> tuple[Chain, dict]:
    """Inverse of :func:`save_chain`; returns the chain and its metadata."""
    import json

    with open(f"{path}.json") as fh:
        meta = json.load(fh)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header[1:] != meta["columns"]:
        raise DataError("chain CSV header does not match its metadata")
    acc = {k: (float("nan") if v is None else v) for k, v in meta["acceptance"].items()}
    chain = Chain(columns=tuple(meta["columns"]), draws=table[:, 1:], family=Family.parse(meta["family"]),
                  config=SamplerConfig.from_dict(meta["config"]), prior=PriorSpec.from_dict(meta["prior"]),
                  acceptance=acc, beta_names=tuple(meta["beta_names"]), seed=meta["seed"],
                  chain_id=table[:, 0].astype(int))
    return chain, meta
