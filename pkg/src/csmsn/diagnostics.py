"""Model comparison, influence and residual diagnostics from posterior draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtri

from csmsn.densities import logpdf
from csmsn.mcmc import Chain, RegressionData, point_estimate
from csmsn.params import CpParams
from csmsn.random import as_generator, simulate_errors


def obs_loglik(chain: Chain, data: RegressionData) -> np.ndarray:
    """(M, n) matrix of log f(y_i | theta_m)."""
    out = np.empty((len(chain), data.n))
    for m in range(len(chain)):
        p = chain.cp_params(m)
        out[m] = logpdf(data.y, p, loc=data.X @ p.beta)
    return out


def log_cpo(loglik: np.ndarray) -> np.ndarray:
    """Harmonic-mean CPO on the log scale, stable via logsumexp."""
    M = loglik.shape[0]
    return -(logsumexp(-loglik, axis=0) - math.log(M))


def lpml(loglik: np.ndarray) -> float:
    return float(np.sum(log_cpo(loglik)))


def n_parameters(chain: Chain) -> int:
    """Coefficients, sigma2 (unless fixed), gamma and the shape vector."""
    return chain.n_beta + (0 if chain.family.fixed_scale else 1) + 1 + chain.family.nu_dim


def _stable_mean(x, axis=0):
    # Anchored mean: exact for constant input, so degenerate chains give pD = 0.
    x = np.asarray(x, dtype=float)
    x0 = np.take(x, [0], axis=axis)
    return np.squeeze(x0, axis=axis) + np.mean(x - x0, axis=axis)


def posterior_mean_params(chain: Chain) -> CpParams:
    mean = _stable_mean(chain.draws)
    cols = {c: mean[j] for j, c in enumerate(chain.columns)}
    return CpParams(beta=mean[:chain.n_beta], sigma2=1.0 if chain.family.fixed_scale else cols["sigma2"],
                    gamma=cols["gamma"], family=chain.family,
                    nu=tuple(cols[c] for c in chain.family.nu_names))


@dataclass(frozen=True)
class Criteria:
    lpml: float
    dic: float
    eaic: float
    ebic: float
    pd: float
    dbar: float
    d_at_mean: float
    k: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def criteria(chain: Chain, data: RegressionData, loglik: np.ndarray | None = None) -> Criteria:
    """LPML, DIC, EAIC and EBIC with D = -2 log-likelihood.

    EAIC and EBIC penalize the deviance at the posterior mean; DIC is
    D(theta_bar) + 2 pD, equivalently Dbar + pD.
    """
    if loglik is None:
        loglik = obs_loglik(chain, data)
    dev = -2.0 * loglik.sum(axis=1)
    dbar = float(_stable_mean(dev))
    pm = posterior_mean_params(chain)
    d_mean = float(-2.0 * np.sum(logpdf(data.y, pm, loc=data.X @ pm.beta)))
    pd = dbar - d_mean
    k = n_parameters(chain)
    return Criteria(lpml=lpml(loglik), dic=d_mean + 2.0 * pd, eaic=d_mean + 2 * k,
                    ebic=d_mean + k * math.log(data.n),
                    pd=pd, dbar=dbar, d_at_mean=d_mean, k=k)


def kl_influence(loglik: np.ndarray) -> np.ndarray:
    """K(P, P_{-i}) = -log CPO_i + E[log f(y_i | theta)]."""
    # Nonnegative in expectation; small negative values are Monte Carlo noise.
    return -log_cpo(loglik) + _stable_mean(loglik, axis=0)


def calibrate(K) -> np.ndarray:
    """Map a divergence to the success probability of an equally divergent coin."""
    K = np.maximum(np.asarray(K, dtype=float), 0.0)
    return 0.5 * (1.0 + np.sqrt(-np.expm1(-2.0 * K)))


def influential(loglik: np.ndarray, threshold: float = 0.8) -> np.ndarray:
    return np.flatnonzero(calibrate(kl_influence(loglik)) >= threshold)


def residuals(chain: Chain, data: RegressionData, estimate: CpParams | None = None) -> np.ndarray:
    est = estimate or point_estimate(chain)
    return (data.y - data.X @ est.beta) / est.sigma


def blom_quantiles(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    return ndtri((i - 0.375) / (n + 0.25))


@dataclass(frozen=True)
class Envelope:
    theoretical: np.ndarray
    observed: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray

    @property
    def outside(self) -> np.ndarray:
        return (self.observed < self.lower) | (self.observed > self.upper)

    @property
    def n_outside(self) -> int:
        return int(self.outside.sum())

    @property
    def fraction_inside(self) -> float:
        return 1.0 - self.n_outside / self.observed.size


def qq_envelope(resid, estimate: CpParams, n_sims: int = 100, rng=None, level: float = 0.95) -> Envelope:
    """Simulated order-statistic band for standardized residuals.

    Each simulated set is drawn from the fitted error law with unit scale.
    """
    gen = as_generator(rng)
    r = np.sort(np.asarray(resid, dtype=float))
    n = r.size
    unit = CpParams(beta=[0.0], sigma2=1.0, gamma=estimate.gamma, family=estimate.family, nu=estimate.nu)
    sims = np.sort(np.vstack([simulate_errors(n, unit, gen) for _ in range(n_sims)]), axis=1)
    alpha = (1.0 - level) / 2.0
    lo, med, hi = np.quantile(sims, [alpha, 0.5, 1.0 - alpha], axis=0)
    return Envelope(blom_quantiles(n), r, lo, med, hi)
