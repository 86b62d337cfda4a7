"""Parameterizations of the skew-normal scale-mixture family.

Three coordinate systems are used throughout the package:

* centered (``CpParams``): mean/coefficients, variance ``sigma2`` and
  Pearson skewness ``gamma``;
* direct (``DpParams``): location ``xi``, scale ``omega``, shape ``lambda``;
* sampler-internal (``WorkParams``): ``beta``, ``Delta``, ``tau``.

All maps between them are exact closed forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from csmsn.errors import ParameterError, SkewnessRangeError

B = math.sqrt(2.0 / math.pi)
S = (2.0 / (4.0 - math.pi)) ** (1.0 / 3.0)
# Limit of the skewness map as delta -> 1.
GAMMA_MAX = 0.5 * (4.0 - math.pi) * B**3 / (1.0 - B**2) ** 1.5
GAMMA_MAX_DOC = 0.99527


@dataclass(frozen=True)
class Constants:
    b: float = B
    s: float = S
    gamma_max: float = GAMMA_MAX


class Family(str, enum.Enum):
    CSN = "csn"
    CST = "cst"
    CSS = "css"
    CSCN = "cscn"
    CSGT = "csgt"

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, Family):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown family {value!r}") from None

    @property
    def nu_dim(self) -> int:
        return {"csn": 0, "cst": 1, "css": 1, "cscn": 2, "csgt": 2}[self.value]

    @property
    def nu_names(self) -> tuple[str, ...]:
        return {0: (), 1: ("nu",), 2: ("nu1", "nu2")}[self.nu_dim]

    @property
    def fixed_scale(self) -> bool:
        """True when sigma is pinned to 1 for identifiability."""
        return self is Family.CSGT


def check_nu(family: Family, nu) -> tuple[float, ...]:
    family = Family.parse(family)
    nu = tuple(float(v) for v in np.atleast_1d(np.asarray(nu, dtype=float))) if np.size(nu) else ()
    if len(nu) != family.nu_dim:
        raise ParameterError(f"{family.name} expects {family.nu_dim} shape values, got {len(nu)}")
    if not all(math.isfinite(v) for v in nu):
        raise ParameterError(f"non-finite shape vector {nu}")
    if family is Family.CST and not nu[0] > 2:
        raise ParameterError(f"CST requires nu > 2, got {nu[0]}")
    if family is Family.CSS and not nu[0] > 1:
        raise ParameterError(f"CSS requires nu > 1, got {nu[0]}")
    if family is Family.CSCN and not (0 < nu[0] < 1 and 0 < nu[1] < 1):
        raise ParameterError(f"CSCN requires nu1, nu2 in (0, 1), got {nu}")
    if family is Family.CSGT and not (nu[0] > 2 and nu[1] > 0):
        raise ParameterError(f"CSGT requires nu1 > 2 and nu2 > 0, got {nu}")
    return nu


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or abs(gamma) >= GAMMA_MAX:
        raise SkewnessRangeError(
            f"skewness {gamma} outside (-{GAMMA_MAX:.6f}, {GAMMA_MAX:.6f})")
    # Within rounding of the bound the shape map degenerates.
    c2 = np.cbrt(gamma) ** 2
    if not B**2 + S**2 * c2 * (B**2 - 1.0) > 0:
        raise SkewnessRangeError(f"skewness {gamma} too close to the boundary")
    return gamma


@dataclass(frozen=True)
class CpParams:
    beta: np.ndarray
    sigma2: float
    gamma: float
    family: Family = Family.CSN
    nu: tuple[float, ...] = field(default=())

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "nu", check_nu(family, self.nu))
        object.__setattr__(self, "gamma", check_gamma(self.gamma))
        sigma2 = float(self.sigma2)
        if not (math.isfinite(sigma2) and sigma2 > 0):
            raise ParameterError(f"sigma2 must be positive, got {sigma2}")
        if family.fixed_scale and sigma2 != 1.0:
            raise ParameterError("CSGT carries sigma2 = 1")
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def mu(self) -> float:
        return float(self.beta[0])

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def delta(self) -> float:
        return float(delta_from_gamma(self.gamma))

    def replace(self, **changes) -> "CpParams":
        kw = dict(beta=self.beta, sigma2=self.sigma2, gamma=self.gamma,
                  family=self.family, nu=self.nu)
        kw.update(changes)
        return CpParams(**kw)


@dataclass(frozen=True)
class DpParams:
    xi: np.ndarray
    omega: float
    lam: float
    family: Family = Family.CSN
    nu: tuple[float, ...] = field(default=())

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float)).copy()
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        nu = tuple(float(v) for v in np.atleast_1d(self.nu)) if np.size(self.nu) else ()
        if len(nu) != family.nu_dim:
            raise ParameterError(f"{family.name} expects {family.nu_dim} shape values")
        object.__setattr__(self, "nu", nu)
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if not math.isfinite(self.lam):
            raise ParameterError("lambda must be finite")
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def delta(self) -> float:
        return self.lam / math.sqrt(1.0 + self.lam**2)


@dataclass(frozen=True)
class WorkParams:
    beta: np.ndarray
    Delta: float
    tau: float
    nu: tuple[float, ...] = field(default=())
    family: Family = Family.CSN

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "family", Family.parse(self.family))
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ParameterError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))

    @property
    def delta(self) -> float:
        return self.Delta / math.sqrt(self.tau + self.Delta**2)

    @property
    def sigma2(self) -> float:
        return self.tau + self.Delta**2 * (1.0 - B**2)


# Scalar/array helpers used by the sampler on whole chains.

def gamma_from_delta(delta):
    bd = B * np.asarray(delta, dtype=float)
    return 0.5 * (4.0 - np.pi) * bd**3 / (1.0 - bd**2) ** 1.5


def lambda_from_gamma(gamma):
    c = np.cbrt(np.asarray(gamma, dtype=float))
    return S * c / np.sqrt(B**2 + S**2 * c**2 * (B**2 - 1.0))


def delta_from_gamma(gamma):
    lam = lambda_from_gamma(gamma)
    return lam / np.sqrt(1.0 + lam**2)


def delta_from_work(Delta, tau):
    Delta = np.asarray(Delta, dtype=float)
    return Delta / np.sqrt(tau + Delta**2)


def sigma2_from_work(Delta, tau):
    return tau + np.asarray(Delta, dtype=float) ** 2 * (1.0 - B**2)


def work_from_delta(delta, sigma2=1.0):
    """(Delta, tau) for given delta and variance; sigma2=1 is the CSGT case."""
    delta = np.asarray(delta, dtype=float)
    denom = 1.0 - B**2 * delta**2
    return np.sqrt(sigma2) * delta / np.sqrt(denom), sigma2 * (1.0 - delta**2) / denom


def cp_to_dp(p: CpParams) -> DpParams:
    c = float(np.cbrt(p.gamma))
    sigma = p.sigma
    xi = p.beta.copy()
    xi[0] = p.beta[0] - sigma * c * S
    omega = sigma * math.sqrt(1.0 + S**2 * c**2)
    lam = S * c / math.sqrt(B**2 + S**2 * c**2 * (B**2 - 1.0))
    return DpParams(xi=xi, omega=omega, lam=lam, family=p.family, nu=p.nu)


def dp_to_cp(p: DpParams) -> CpParams:
    delta = p.delta
    beta = p.xi.copy()
    beta[0] = p.xi[0] + p.omega * B * delta
    sigma2 = p.omega**2 * (1.0 - B**2 * delta**2)
    gamma = float(gamma_from_delta(delta))
    if p.family.fixed_scale:
        # Tolerate round-off from a sigma = 1 source.
        if abs(sigma2 - 1.0) > 1e-9:
            raise ParameterError("CSGT direct parameters must imply sigma2 = 1")
        sigma2 = 1.0
    return CpParams(beta=beta, sigma2=sigma2, gamma=gamma, family=p.family, nu=p.nu)


def cp_to_work(p: CpParams) -> WorkParams:
    Delta, tau = work_from_delta(p.delta, p.sigma2)
    return WorkParams(beta=p.beta, Delta=float(Delta), tau=float(tau), nu=p.nu, family=p.family)


def work_to_cp(w: WorkParams) -> CpParams:
    sigma2 = w.sigma2
    if w.family.fixed_scale:
        if abs(sigma2 - 1.0) > 1e-9:
            raise ParameterError("CSGT working parameters must imply sigma2 = 1")
        sigma2 = 1.0
    return CpParams(beta=w.beta, sigma2=sigma2, gamma=float(gamma_from_delta(w.delta)),
                    family=w.family, nu=w.nu)
