"""Simulation studies: parameter recovery and residual envelopes under misspecification."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from csmsn.diagnostics import Envelope, qq_envelope, residuals
from csmsn.errors import NumericError
from csmsn.mcmc import DESK, PriorSpec, RegressionData, SamplerConfig, point_estimate, run_chain, summarize
from csmsn.params import CpParams, Family
from csmsn.parallel import map_jobs
from csmsn.random import RngStream, simulate_response

SHAPES = {Family.CSN: (), Family.CST: (5.0,), Family.CSS: (3.0,), Family.CSCN: (0.5, 0.5),
          Family.CSGT: (15.0, 5.0)}
SKEWNESS = {Family.CSN: -0.9, Family.CST: -0.9, Family.CSS: 0.9, Family.CSCN: -0.9, Family.CSGT: 0.9}


def default_truth(family, gamma: float | None = None) -> CpParams:
    family = Family.parse(family)
    return CpParams(beta=[1.0, 2.0], sigma2=1.0, gamma=SKEWNESS[family] if gamma is None else gamma,
                    family=family, nu=SHAPES[family])


@dataclass(frozen=True)
class Scenario:
    family: Family
    n: int = 500
    R: int = 10
    truth: CpParams | None = None
    prior: PriorSpec = field(default_factory=PriorSpec)
    config: SamplerConfig = field(default_factory=lambda: SamplerConfig(**DESK))
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.truth is None:
            object.__setattr__(self, "truth", default_truth(self.family))
        if self.truth.family is not self.family:
            raise ValueError("truth family differs from the scenario family")
        if self.n < 3 or self.R < 1:
            raise ValueError("need n >= 3 and R >= 1")


def simulate_design(n: int, rng) -> np.ndarray:
    """Intercept plus one mean-centered standard-normal covariate."""
    x = rng.standard_normal(n)
    return np.column_stack([np.ones(n), x - x.mean()])


def tracked_parameters(family: Family, p: int) -> tuple[str, ...]:
    names = [f"beta_{j}" for j in range(p)]
    if not family.fixed_scale:
        names.append("sigma2")
    return tuple(names) + ("gamma", "delta") + family.nu_names


def truth_values(truth: CpParams) -> dict:
    out = {f"beta_{j}": float(b) for j, b in enumerate(truth.beta)}
    out.update(sigma2=truth.sigma2, gamma=truth.gamma, delta=truth.delta)
    out.update(zip(truth.family.nu_names, truth.nu))
    return out


def _replica(args):
    scenario, r = args
    stream = RngStream(scenario.seed, r)
    gen = stream.child(0).generator()
    X = simulate_design(scenario.n, gen)
    y = simulate_response(X, scenario.truth, gen)
    data = RegressionData(y, X)
    try:
        chain = run_chain(data, scenario.family, scenario.prior, scenario.config, stream.child(1))
    except NumericError as exc:
        return r, None, str(exc)
    summ = summarize(chain)
    names = tracked_parameters(scenario.family, data.p)
    est = np.array([summ[n].estimate for n in names])
    lo = np.array([summ[n].lower for n in names])
    hi = np.array([summ[n].upper for n in names])
    return r, (est, lo, hi), None


def _fsum_mean(x):
    return math.fsum(x) / len(x)


@dataclass
class RecoveryReport:
    parameters: tuple[str, ...]
    truth: np.ndarray
    estimates: np.ndarray       # (R_ok, P) per-replica point estimates
    lower: np.ndarray
    upper: np.ndarray
    replicas: np.ndarray        # replica ids kept
    failures: dict

    def _col(self, a, j):
        return [float(v) for v in a[:, j]]

    def table(self) -> list[dict]:
        rows = []
        R = self.estimates.shape[0]
        for j, name in enumerate(self.parameters):
            e = self._col(self.estimates, j)
            est = _fsum_mean(e)
            var = math.fsum((v - est) ** 2 for v in e) / (R - 1) if R > 1 else 0.0
            truth = float(self.truth[j])
            bias = est - truth
            covered = [lo <= truth <= hi for lo, hi in zip(self._col(self.lower, j), self._col(self.upper, j))]
            length = _fsum_mean([hi - lo for lo, hi in zip(self._col(self.lower, j), self._col(self.upper, j))])
            rows.append(dict(parameter=name, Real=truth, Est=est, Var=var, Bias=bias,
                             RelBias=abs(bias) / abs(truth) if truth != 0 else float("nan"),
                             RMSE=math.sqrt(bias * bias + var), CR=sum(covered) / R, LengthCI=length))
        return rows

    def row(self, name: str) -> dict:
        return self.table()[self.parameters.index(name)]

    def to_csv(self, path):
        rows = self.table()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: (v if isinstance(v, str) else repr(float(v))) for k, v in r.items()})

    def replicas_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replica", "parameter", "estimate", "lower", "upper"])
            for i, r in enumerate(self.replicas):
                for j, name in enumerate(self.parameters):
                    w.writerow([int(r), name, repr(float(self.estimates[i, j])),
                                repr(float(self.lower[i, j])), repr(float(self.upper[i, j]))])


def run_recovery(scenario: Scenario, workers: int = 1, max_failure_rate: float = 0.2) -> RecoveryReport:
    """Simulate, fit and summarize ``scenario.R`` independent replicas."""
    results = map_jobs(_replica, [(scenario, r) for r in range(scenario.R)], workers)
    names = tracked_parameters(scenario.family, scenario.truth.beta.size)
    ok = [(r, res) for r, res, _ in results if res is not None]
    failures = {r: msg for r, _, msg in results if msg is not None}
    if len(failures) > max_failure_rate * scenario.R or not ok:
        raise NumericError(f"{len(failures)} of {scenario.R} replicas failed: {failures}")
    tv = truth_values(scenario.truth)
    return RecoveryReport(
        parameters=names, truth=np.array([tv[n] for n in names]),
        estimates=np.array([res[0] for _, res in ok]), lower=np.array([res[1] for _, res in ok]),
        upper=np.array([res[2] for _, res in ok]), replicas=np.array([r for r, _ in ok]), failures=failures)


@dataclass
class ResidualFit:
    family: Family
    envelope: Envelope
    estimate: CpParams

    @property
    def n_outside(self) -> int:
        return self.envelope.n_outside


def run_residual_study(gen_family, fit_families, n: int = 500, seed: int = 0,
                       config: SamplerConfig | None = None, prior: PriorSpec | None = None,
                       n_sims: int = 100, truth: CpParams | None = None) -> dict:
    """Fit each family in ``fit_families`` to one dataset drawn from ``gen_family``."""
    gen_family = Family.parse(gen_family)
    truth = truth or default_truth(gen_family)
    config = config or SamplerConfig(**DESK)
    stream = RngStream(seed, 0)
    gen = stream.child(0).generator()
    X = simulate_design(n, gen)
    data = RegressionData(simulate_response(X, truth, gen), X)
    out = {}
    for k, fam in enumerate(fit_families):
        fam = Family.parse(fam)
        cfg = dataclasses.replace(config, seed=seed)
        chain = run_chain(data, fam, prior, cfg, stream.child(1 + 2 * k))
        est = point_estimate(chain)
        env = qq_envelope(residuals(chain, data, est), est, n_sims, stream.child(2 + 2 * k))
        out[fam.value] = ResidualFit(fam, env, est)
    return out


def envelope_to_csv(env: Envelope, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theoretical", "observed", "lower", "median", "upper", "outside"])
        for row in zip(env.theoretical, env.observed, env.lower, env.median, env.upper, env.outside):
            w.writerow([repr(float(v)) for v in row[:5]] + [int(row[5])])
