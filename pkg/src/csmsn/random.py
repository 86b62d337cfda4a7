"""Random generation: streams, truncated samplers, mixing laws, responses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincc, gammainccinv, gammaincinv, ndtr, ndtri

from csmsn.errors import DegenerateRegionError, NumericError
from csmsn.params import B, CpParams, Family, check_nu, cp_to_dp, cp_to_work

ROBERT_THRESHOLD = 5.0


@dataclass(frozen=True)
class RngStream:
    """A reproducible, independent stream keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        # Sub-streams of a stream: fold the index into the stream id space.
        return RngStream(self.seed, self.stream_id * 1_000_003 + index + 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def _robert_tail(a, rng):
    """Draw from N(0,1) restricted to (a, inf), a > 0, by exponential rejection."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    todo = np.arange(a.size)
    alpha = 0.5 * (a + np.sqrt(a * a + 4.0))
    while todo.size:
        z = a[todo] + rng.exponential(size=todo.size) / alpha[todo]
        keep = rng.random(todo.size) <= np.exp(-0.5 * (z - alpha[todo]) ** 2)
        out[todo[keep]] = z[keep]
        todo = todo[~keep]
    return out


def _std_truncnorm(a, b, rng):
    """Standard normal restricted to (a, b), elementwise."""
    x = np.empty_like(a)
    right = a > ROBERT_THRESHOLD
    left = b < -ROBERT_THRESHOLD
    mid = ~(right | left)
    if mid.any():
        am, bm = a[mid], b[mid]
        u = rng.random(am.size)
        pos = am > 0
        res = np.empty_like(am)
        # Right of zero work with upper tails for precision.
        qa, qb = ndtr(-am[pos]), ndtr(-bm[pos])
        res[pos] = -ndtri(qb + u[pos] * (qa - qb))
        pa, pb = ndtr(am[~pos]), ndtr(bm[~pos])
        res[~pos] = ndtri(pa + u[~pos] * (pb - pa))
        x[mid] = res
    for side, lo, hi in ((right, a, b), (left, -b, -a)):
        if not side.any():
            continue
        lo_s, hi_s = lo[side], hi[side]
        vals = _robert_tail(lo_s, rng)
        over = vals >= hi_s
        while over.any():
            vals[over] = _robert_tail(lo_s[over], rng)
            over = vals >= hi_s
        x[side] = vals if side is right else -vals
    return x


def sample_truncated_normal(mean, variance, lower=-np.inf, upper=np.inf, rng=None, size=None):
    """Draw N(mean, variance) restricted to the open interval (lower, upper)."""
    rng = as_generator(rng)
    mean, variance, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, variance, lower, upper)))
    if size is not None:
        mean, variance, lower, upper = (np.broadcast_to(v, size) for v in (mean, variance, lower, upper))
    shape = mean.shape
    sd = np.sqrt(variance).ravel()
    m = mean.ravel()
    lo, hi = lower.ravel(), upper.ravel()
    a = (lo - m) / sd
    b = (hi - m) / sd
    x = m + sd * _std_truncnorm(a, b, rng)
    bad = ~((x > lo) & (x < hi))
    tries = 0
    while bad.any():
        tries += 1
        if tries > 100:
            raise NumericError("truncated normal draws fell outside their region")
        x[bad] = m[bad] + sd[bad] * _std_truncnorm(a[bad], b[bad], rng)
        bad = ~((x > lo) & (x < hi))
    return x.reshape(shape) if shape else float(x[0])


def sample_truncated_gamma(shape, rate, lower=0.0, upper=np.inf, rng=None, size=None):
    """Inverse-CDF draw from gamma(shape, rate) restricted to (lower, upper)."""
    rng = as_generator(rng)
    k, r, lo, hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (shape, rate, lower, upper)))
    if size is not None:
        k, r, lo, hi = (np.broadcast_to(v, size) for v in (k, r, lo, hi))
    out_shape = k.shape
    k, r, lo, hi = (v.ravel() for v in (k, r, lo, hi))
    xl, xu = r * lo, r * hi
    Pl, Pu = gammainc(k, xl), gammainc(k, xu)
    Ql, Qu = gammaincc(k, xl), gammaincc(k, xu)
    upper_tail = Pl > 0.5
    mass = np.where(upper_tail, Ql - Qu, Pu - Pl)
    if np.any(~(mass > 1e-300)):
        raise DegenerateRegionError(
            "truncation region carries (numerically) no gamma mass",
            error_estimate=float(np.min(mass)))
    u = rng.random(k.size)
    x = np.empty(k.size)
    ut = upper_tail
    x[ut] = gammainccinv(k[ut], Qu[ut] + u[ut] * mass[ut]) / r[ut]
    x[~ut] = gammaincinv(k[~ut], Pl[~ut] + u[~ut] * mass[~ut]) / r[~ut]
    # Round-off can land exactly on a bound; nudge inside.
    x = np.minimum(np.maximum(x, np.nextafter(lo, np.inf)), np.nextafter(hi, -np.inf))
    if not np.all((x > lo) & (x < hi)):
        raise NumericError("truncated gamma draw outside its region")
    return x.reshape(out_shape) if out_shape else float(x[0])


@dataclass(frozen=True)
class MixingLaw:
    family: Family
    nu: tuple[float, ...] = ()

    def __post_init__(self):
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        nu = tuple(float(v) for v in self.nu)
        if family is Family.CSCN and len(nu) == 2 and nu[0] == 0.0:
            # No contamination: allowed for simulation, U = 1 always.
            check_nu(family, (0.5, nu[1]))
        else:
            nu = check_nu(family, nu)
        object.__setattr__(self, "nu", nu)


def sample_mixing(law: MixingLaw, rng=None, size=None):
    """Draw the scale variable U (so that Var(Y) = sigma2 * E(1/U))."""
    rng = as_generator(rng)
    fam, nu = law.family, law.nu
    if fam is Family.CSN:
        return np.ones(size) if size is not None else 1.0
    if fam is Family.CST:
        return rng.gamma(nu[0] / 2.0, 2.0 / nu[0], size=size)
    if fam is Family.CSS:
        return rng.random(size) ** (1.0 / nu[0])
    if fam is Family.CSCN:
        return np.where(rng.random(size) < nu[0], nu[1], 1.0)
    return rng.gamma(nu[0] / 2.0, 2.0 / nu[1], size=size)


def simulate_errors(n: int, p: CpParams, rng=None):
    """Errors from the sampler hierarchy: Delta/sqrt(u)(h - b) + sqrt(tau/u) Z."""
    rng = as_generator(rng)
    w = cp_to_work(p)
    u = np.asarray(sample_mixing(MixingLaw(p.family, p.nu), rng, size=n), dtype=float)
    h = np.abs(rng.standard_normal(n))
    z = rng.standard_normal(n)
    return (w.Delta * (h - B) + math.sqrt(w.tau) * z) / np.sqrt(u)


def simulate_errors_definition(n: int, p: CpParams, rng=None):
    """Errors as u^{-1/2} Z with Z ~ CSN(0, sigma2, gamma) drawn via Henze's representation."""
    rng = as_generator(rng)
    dp = cp_to_dp(p.replace(beta=[0.0]))
    delta = dp.delta
    u = np.asarray(sample_mixing(MixingLaw(p.family, p.nu), rng, size=n), dtype=float)
    t0 = np.abs(rng.standard_normal(n))
    t1 = rng.standard_normal(n)
    z = dp.xi[0] + dp.omega * (delta * t0 + math.sqrt(1.0 - delta**2) * t1)
    return z / np.sqrt(u)


def simulate_response(X, p: CpParams, rng=None):
    """y = X beta + e with CSMSN(0, sigma2, gamma, nu) errors."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != p.beta.size:
        raise ValueError(f"design has {X.shape[1]} columns but beta has {p.beta.size}")
    return X @ p.beta + simulate_errors(X.shape[0], p, rng)
