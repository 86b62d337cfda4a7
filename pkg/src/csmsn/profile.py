"""Profiled relative log-likelihoods over skewness and shape parameters.

Every grid point is an inner maximum over the remaining parameters, found
by Nelder-Mead on an unconstrained transform of each coordinate. The
direct parameterization is evaluated through the exact map to the centered
one, so both profile the same likelihood surface.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, logit

from csmsn.densities import logpdf
from csmsn.errors import CsmsnError
from csmsn.mcmc import RegressionData
from csmsn.params import GAMMA_MAX, CpParams, DpParams, Family, cp_to_dp, dp_to_cp

NU_LOWER = {Family.CST: (2.0,), Family.CSS: (1.0,), Family.CSGT: (2.0, 0.0)}


class ParamCoder:
    """Named parameter vector <-> unconstrained optimizer coordinates."""

    def __init__(self, family: Family, p: int, parameterization: str = "cp"):
        self.family = Family.parse(family)
        self.p = p
        self.param = parameterization.lower()
        if self.param not in ("cp", "dp"):
            raise ValueError("parameterization must be 'cp' or 'dp'")
        if self.param == "cp":
            names = [f"beta_{j}" for j in range(p)]
            if not self.family.fixed_scale:
                names.append("sigma2")
            names.append("gamma")
        else:
            names = [f"xi_{j}" for j in range(p)]
            if not self.family.fixed_scale:
                names.append("omega")
            names.append("lam")
        self.names = tuple(names) + self.family.nu_names

    def to_internal(self, name: str, value: float) -> float:
        if name in ("sigma2", "omega"):
            return math.log(value)
        if name == "gamma":
            return math.atanh(value / GAMMA_MAX)
        if name.startswith("nu"):
            j = 0 if name in ("nu", "nu1") else 1
            if self.family is Family.CSCN:
                return float(logit(value))
            return math.log(value - NU_LOWER[self.family][j])
        return float(value)

    def from_internal(self, name: str, x: float) -> float:
        if name in ("sigma2", "omega"):
            return math.exp(x)
        if name == "gamma":
            return GAMMA_MAX * math.tanh(x)
        if name.startswith("nu"):
            j = 0 if name in ("nu", "nu1") else 1
            if self.family is Family.CSCN:
                return float(expit(x))
            return NU_LOWER[self.family][j] + math.exp(x)
        return float(x)

    def to_cp(self, values: dict) -> CpParams:
        nu = tuple(values[n] for n in self.family.nu_names)
        if self.param == "cp":
            beta = [values[f"beta_{j}"] for j in range(self.p)]
            sigma2 = 1.0 if self.family.fixed_scale else values["sigma2"]
            return CpParams(beta=beta, sigma2=sigma2, gamma=values["gamma"], family=self.family, nu=nu)
        xi = [values[f"xi_{j}"] for j in range(self.p)]
        lam = values["lam"]
        if self.family.fixed_scale:
            d = lam / math.sqrt(1.0 + lam * lam)
            omega = 1.0 / math.sqrt(1.0 - 2.0 / math.pi * d * d)
        else:
            omega = values["omega"]
        return dp_to_cp(DpParams(xi=xi, omega=omega, lam=lam, family=self.family, nu=nu))

    def from_cp(self, cp: CpParams) -> dict:
        out = {}
        if self.param == "cp":
            out.update({f"beta_{j}": float(b) for j, b in enumerate(cp.beta)})
            if not self.family.fixed_scale:
                out["sigma2"] = cp.sigma2
            out["gamma"] = cp.gamma
        else:
            dp = cp_to_dp(cp)
            out.update({f"xi_{j}": float(x) for j, x in enumerate(dp.xi)})
            if not self.family.fixed_scale:
                out["omega"] = dp.omega
            out["lam"] = dp.lam
        out.update(dict(zip(self.family.nu_names, cp.nu)))
        return out


def loglik(data: RegressionData, p: CpParams) -> float:
    return float(np.sum(logpdf(data.y, p, loc=data.X @ p.beta)))


def moment_start(data: RegressionData, family) -> CpParams:
    """OLS coefficients, residual variance and clipped sample skewness."""
    family = Family.parse(family)
    beta, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    r = data.y - data.X @ beta
    g = float(np.clip(stats.skew(r), -0.8, 0.8)) if r.size > 2 and np.std(r) > 0 else 0.0
    nu = {Family.CSN: (), Family.CST: (6.0,), Family.CSS: (3.0,), Family.CSCN: (0.3, 0.3),
          Family.CSGT: (6.0, 4.0)}[family]
    sigma2 = 1.0 if family.fixed_scale else max(float(np.var(r)), 1e-6)
    return CpParams(beta=beta, sigma2=sigma2, gamma=g, family=family, nu=nu)


@dataclass
class MleResult:
    values: dict
    loglik: float
    converged: bool
    params: CpParams | None = None

    @property
    def x(self):
        return self.values


def mle_fixed(data: RegressionData, family, fixed: dict | None = None, parameterization: str = "cp",
              start: dict | CpParams | None = None, restarts: int = 3, rng=0, tol: float = 1e-8,
              maxiter: int | None = None) -> MleResult:
    """Maximize the log-likelihood over the parameters not listed in ``fixed``."""
    family = Family.parse(family)
    coder = ParamCoder(family, data.p, parameterization)
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(coder.names)
    if unknown:
        raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
    free = [n for n in coder.names if n not in fixed]
    if start is None:
        start = moment_start(data, family)
    base = coder.from_cp(start) if isinstance(start, CpParams) else dict(start)
    base.update(fixed)

    def assemble(x):
        vals = dict(fixed)
        for n, xi in zip(free, x):
            vals[n] = coder.from_internal(n, xi)
        return vals

    def objective(x):
        try:
            val = -loglik(data, coder.to_cp(assemble(x)))
        except (CsmsnError, ValueError, ArithmeticError):
            return np.inf
        return val if np.isfinite(val) else np.inf

    if not free:
        vals = dict(fixed)
        ll = -objective(np.zeros(0))
        return MleResult(vals, ll, np.isfinite(ll), coder.to_cp(vals) if np.isfinite(ll) else None)

    x0 = np.array([coder.to_internal(n, base[n]) for n in free])
    gen = np.random.default_rng(rng)
    opts = dict(xatol=tol, fatol=tol, maxiter=maxiter or 2000 * len(free), maxfev=maxiter or 4000 * len(free),
                adaptive=len(free) > 2)
    best, converged = None, False
    starts = [x0] + [x0 + 0.1 * gen.standard_normal(x0.size) for _ in range(max(restarts, 1) - 1)]
    for s in starts:
        res = optimize.minimize(objective, s, method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
        converged |= bool(res.success)
    # A fresh simplex at the incumbent guards against premature collapse.
    res = optimize.minimize(objective, best.x, method="Nelder-Mead", options=opts)
    if res.fun <= best.fun:
        best = res
    vals = assemble(best.x)
    ll = -float(best.fun)
    if not np.isfinite(ll):
        return MleResult(vals, np.nan, False, None)
    return MleResult(vals, ll, converged, coder.to_cp(vals))


@dataclass
class ProfileGrid:
    axis: tuple[str, ...]
    points: np.ndarray            # (G, len(axis))
    loglik: np.ndarray            # raw inner maxima
    scale: float = 1.0
    max_loglik: float = np.nan    # best attained value, including the free MLE
    converged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def values(self) -> np.ndarray:
        """Relative profile (times ``scale``): zero at the grid maximum."""
        return self.scale * (self.loglik - np.nanmax(self.loglik))

    @property
    def argmax(self) -> np.ndarray:
        return self.points[int(np.nanargmax(self.loglik))]

    def to_rows(self) -> list[dict]:
        rows = []
        for pt, ll, v in zip(self.points, self.loglik, self.values):
            row = dict(zip(self.axis, map(float, pt)))
            row.update(loglik=float(ll), value=float(v))
            rows.append(row)
        return rows

    def to_csv(self, path):
        rows = self.to_rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.axis) + ["loglik", "value"])
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) for k, v in r.items()})


def _sweep(data, family, axis_names, points, parameterization, free_fit, restarts):
    """Evaluate points outward from the one nearest the free MLE, warm-starting."""
    G = len(points)
    ll = np.full(G, np.nan)
    ok = np.zeros(G, dtype=bool)
    sols: list[dict | None] = [None] * G
    mle_pt = np.array([free_fit.values[a] for a in axis_names])
    centre = int(np.argmin(np.sum((points - mle_pt) ** 2, axis=1)))

    def solve(i, warm):
        fixed = dict(zip(axis_names, map(float, points[i])))
        res = mle_fixed(data, family, fixed, parameterization, start=warm, restarts=restarts, rng=i)
        if not np.isfinite(res.loglik):
            warnings.warn(f"profile point {points[i]} failed; flagged as NaN")
            return
        ll[i], ok[i], sols[i] = res.loglik, res.converged, res.values
        if not res.converged:
            warnings.warn(f"inner optimizer did not converge at {points[i]}")

    solve(centre, free_fit.values)
    for order in (range(centre + 1, G), range(centre - 1, -1, -1)):
        prev = centre
        for i in order:
            warm = sols[prev] if sols[prev] is not None else free_fit.values
            solve(i, warm)
            prev = i
    return ll, ok


def profile_skewness(data: RegressionData, family, grid, parameterization: str = "cp",
                     twice: bool = True, restarts: int = 3) -> ProfileGrid:
    """Profile over gamma (centered) or lambda (direct)."""
    family = Family.parse(family)
    axis = "gamma" if parameterization.lower() == "cp" else "lam"
    pts = np.sort(np.asarray(grid, dtype=float))
    if axis == "gamma" and np.any(np.abs(pts) >= GAMMA_MAX):
        raise ValueError("gamma grid must lie inside (-gamma_max, gamma_max)")
    free = mle_fixed(data, family, None, parameterization, restarts=restarts)
    ll, ok = _sweep(data, family, (axis,), pts[:, None], parameterization, free, restarts)
    best = np.nanmax(np.append(ll, free.loglik))
    return ProfileGrid((axis,), pts[:, None], ll, 2.0 if twice else 1.0, float(best), ok)


def profile_nu(data: RegressionData, family, grid, grid2=None, restarts: int = 3) -> ProfileGrid:
    """Profile over nu; for two-dimensional shapes pass both axes (rectangular product)."""
    family = Family.parse(family)
    names = family.nu_names
    if not names:
        raise ValueError(f"{family.name} has no shape parameter")
    g1 = np.sort(np.asarray(grid, dtype=float))
    if len(names) == 1:
        pts = g1[:, None]
    else:
        if grid2 is None:
            raise ValueError(f"{family.name} needs a grid for each of {names}")
        g2 = np.sort(np.asarray(grid2, dtype=float))
        a, b = np.meshgrid(g1, g2, indexing="ij")
        # Serpentine order keeps warm starts adjacent.
        b = b.copy()
        b[1::2] = b[1::2, ::-1]
        pts = np.column_stack([a.ravel(), b.ravel()])
    free = mle_fixed(data, family, None, "cp", restarts=restarts)
    if len(names) == 1:
        ll, ok = _sweep(data, family, names, pts, "cp", free, restarts)
    else:
        ll = np.full(len(pts), np.nan)
        ok = np.zeros(len(pts), dtype=bool)
        warm = free.values
        for i, pt in enumerate(pts):
            res = mle_fixed(data, family, dict(zip(names, map(float, pt))), "cp", start=warm,
                            restarts=restarts, rng=i)
            if np.isfinite(res.loglik):
                ll[i], ok[i], warm = res.loglik, res.converged, res.values
            else:
                warnings.warn(f"profile point {pt} failed; flagged as NaN")
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        pts, ll, ok = pts[order], ll[order], ok[order]
    best = np.nanmax(np.append(ll, free.loglik))
    return ProfileGrid(names, pts, ll, 1.0, float(best), ok)
