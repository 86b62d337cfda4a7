"""Command-line frontend: ``csmsn {fit,simulate,profile,diagnose,recover}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from csmsn import diagnostics as diag
from csmsn.errors import ConfigError, DataError, NumericError, ParameterError
from csmsn.mcmc import (Chain, PriorSpec, RegressionData, SamplerConfig, _clean, load_chain, point_estimate,
                        run_chains, save_chain, summarize)
from csmsn.params import CpParams, Family
from csmsn.parallel import worker_count
from csmsn.random import RngStream, simulate_response
from csmsn.studies import Scenario, default_truth, envelope_to_csv, run_recovery, simulate_design

SCHEMA_VERSION = 1
ENVELOPE_STREAM = 7919          # dedicated stream so diagnose reproduces fit
EXIT_OK, EXIT_DATA, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4


# --------------------------------------------------------------------------
# data ingestion

@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]
    response: str

    def regression(self) -> RegressionData:
        return RegressionData(self.y, self.X, self.names)


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a header row; errors name the offending row and column."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {col!r}: non-numeric value {cell!r}") from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path} has no data rows")
    return header, np.array(rows)


def load_dataset(path, response: str | None = None, covariates="all", center: bool = False,
                 intercept: bool = True) -> Dataset:
    header, table = read_table(path)
    response = response or header[0]
    if response not in header:
        raise DataError(f"response column {response!r} not in {header}")
    if covariates in (None, "all"):
        cov = [h for h in header if h != response]
    else:
        cov = list(covariates) if not isinstance(covariates, str) else [c.strip() for c in covariates.split(",") if c.strip()]
        missing = [c for c in cov if c not in header]
        if missing:
            raise DataError(f"covariate columns {missing} not in {header}")
    y = table[:, header.index(response)]
    Z = table[:, [header.index(c) for c in cov]] if cov else np.zeros((y.size, 0))
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(Z))):
        raise DataError(f"{path}: missing or non-finite values")
    if center and cov:
        Z = Z - Z.mean(axis=0)
    names = tuple(cov)
    if intercept:
        Z = np.column_stack([np.ones(y.size), Z])
        names = ("(Intercept)",) + names
    if Z.shape[1] == 0:
        raise DataError("no regression columns: enable the intercept or name covariates")
    return Dataset(y, Z, names, response)


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RunConfig:
    family: str = "csn"
    response: str | None = None
    covariates: object = "all"
    center: bool = False
    intercept: bool = True
    prior: PriorSpec = field(default_factory=PriorSpec)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    n_sims: int = 100
    out: str = "."

    def __post_init__(self):
        try:
            Family.parse(self.family)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_sims < 1:
            raise ConfigError("n_sims must be >= 1")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["prior"] = self.prior.to_dict()
        d["sampler"] = self.sampler.to_dict()
        d["family"] = Family.parse(self.family).value
        if not isinstance(self.covariates, str):
            d["covariates"] = list(self.covariates)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        try:
            if "prior" in d and not isinstance(d["prior"], PriorSpec):
                d["prior"] = PriorSpec.from_dict(d["prior"] or {})
            if "sampler" in d and not isinstance(d["sampler"], SamplerConfig):
                d["sampler"] = SamplerConfig.from_dict(d["sampler"] or {})
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return obj


SAMPLER_FLAGS = {"iterations": "iterations", "burn_in": "burn_in", "thin": "thin", "chains": "n_chains",
                 "seed": "seed"}


def resolve_config(args) -> RunConfig:
    """Config file first, then explicit flags on top."""
    base = _read_json(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig.from_dict(base)
    changes = {}
    for key in ("family", "response", "covariates", "out", "n_sims"):
        v = getattr(args, key, None)
        if v is not None:
            changes[key] = v
    if getattr(args, "center", False):
        changes["center"] = True
    if getattr(args, "no_intercept", False):
        changes["intercept"] = False
    if getattr(args, "prior", None):
        changes["prior"] = PriorSpec.from_dict(_read_json(args.prior))
    samp = {SAMPLER_FLAGS[k]: getattr(args, k) for k in SAMPLER_FLAGS if getattr(args, k, None) is not None}
    if samp:
        changes["sampler"] = SamplerConfig.from_dict({**cfg.sampler.to_dict(), **samp})
    return dataclasses.replace(cfg, **changes)


# --------------------------------------------------------------------------
# reports

def build_report(chain: Chain, data: RegressionData, config: RunConfig) -> tuple[dict, diag.Envelope]:
    """Deterministic function of the draws, data and config."""
    summaries = summarize(chain)
    est = point_estimate(chain, summaries)
    loglik = diag.obs_loglik(chain, data)
    crit = diag.criteria(chain, data, loglik)
    K = diag.kl_influence(loglik)
    prob = diag.calibrate(K)
    resid = diag.residuals(chain, data, est)
    env = diag.qq_envelope(resid, est, config.n_sims, RngStream(config.sampler.seed, ENVELOPE_STREAM))
    report = {
        "schema_version": SCHEMA_VERSION,
        "family": chain.family.value,
        "n": data.n,
        "coefficients": list(data.names),
        "config": config.to_dict(),
        "summaries": {k: v.to_dict() for k, v in summaries.items()},
        "criteria": crit.to_dict(),
        "acceptance": chain.acceptance,
        "observations": {
            "log_cpo": diag.log_cpo(loglik),
            "kl": K,
            "calibrated": prob,
            "influential": np.flatnonzero(prob >= 0.8),
        },
        "envelope": {"n_outside": env.n_outside, "fraction_inside": env.fraction_inside},
    }
    return _clean(report), env


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_residuals(resid, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "residual"])
        for i, r in enumerate(resid):
            w.writerow([i, repr(float(r))])


# --------------------------------------------------------------------------
# commands

def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    ds = load_dataset(args.data, cfg.response, cfg.covariates, cfg.center, cfg.intercept)
    data = ds.regression()
    chain = run_chains(data, cfg.family, cfg.prior, cfg.sampler, workers=worker_count())
    cfg = dataclasses.replace(cfg, prior=chain.prior, response=ds.response)
    os.makedirs(cfg.out, exist_ok=True)
    save_chain(chain, os.path.join(cfg.out, "chain.csv"), extra={"run_config": cfg.to_dict()})
    report, env = build_report(chain, data, cfg)
    write_json(report, os.path.join(cfg.out, "report.json"))
    write_residuals(diag.residuals(chain, data), os.path.join(cfg.out, "residuals.csv"))
    envelope_to_csv(env, os.path.join(cfg.out, "envelope.csv"))
    print(f"fit {chain.family.value}: {len(chain)} draws, LPML {report['criteria']['lpml']:.3f} -> {cfg.out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    chain, meta = load_chain(args.chain)
    cfg = RunConfig.from_dict(meta.get("run_config", {}))
    ds = load_dataset(args.data, cfg.response, cfg.covariates, cfg.center, cfg.intercept)
    report, env = build_report(chain, ds.regression(), cfg)
    out = args.out or os.path.dirname(os.path.abspath(args.chain))
    os.makedirs(out, exist_ok=True)
    write_json(report, os.path.join(out, "report.json"))
    envelope_to_csv(env, os.path.join(out, "envelope.csv"))
    print(f"diagnose: report written to {out}")
    return EXIT_OK


def _floats(text, name) -> tuple[float, ...]:
    if text is None:
        return ()
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _truth(args, family: Family) -> CpParams:
    base = default_truth(family)
    if getattr(args, "config", None):
        t = _read_json(args.config).get("truth", {})
        unknown = set(t) - {"beta", "sigma2", "gamma", "nu"}
        if unknown:
            raise ConfigError(f"unknown truth keys: {sorted(unknown)}")
        base = base.replace(**{k: (tuple(v) if k == "nu" else v) for k, v in t.items()})
    ch = {}
    if args.beta is not None:
        ch["beta"] = _floats(args.beta, "beta")
    if args.sigma2 is not None:
        ch["sigma2"] = args.sigma2
    if args.gamma is not None:
        ch["gamma"] = args.gamma
    if args.nu is not None:
        ch["nu"] = _floats(args.nu, "nu")
    try:
        return base.replace(**ch)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args) -> int:
    family = Family.parse(args.family or "csn")
    truth = _truth(args, family)
    gen = RngStream(args.seed or 0, 0).generator()
    n = args.n
    if truth.beta.size == 1:
        X = np.ones((n, 1))
    else:
        cols = [simulate_design(n, gen)[:, 1] for _ in range(truth.beta.size - 1)]
        X = np.column_stack([np.ones(n)] + cols)
    y = simulate_response(X, truth, gen)
    names = ["y"] + [f"x{j}" for j in range(1, X.shape[1])]
    out = args.out or "data.csv"
    np.savetxt(out, np.column_stack([y, X[:, 1:]]), delimiter=",", header=",".join(names), comments="",
               fmt="%.17g")
    print(f"simulate: {n} rows of {family.value} data -> {out}")
    return EXIT_OK


def _grid(text) -> np.ndarray:
    """'lo:hi:count' or a comma list."""
    if text is None:
        raise ConfigError("--grid is required")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("grid ranges are written lo:hi:count")
        try:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise ConfigError(f"bad grid {text!r}") from None
    return np.array(_floats(text, "grid"))


def cmd_profile(args) -> int:
    from csmsn import profile as prof

    cfg = resolve_config(args)
    ds = load_dataset(args.data, cfg.response, cfg.covariates, cfg.center, cfg.intercept)
    data = ds.regression()
    data.check_rank()
    fam = Family.parse(cfg.family)
    if args.axis in ("gamma", "lam"):
        try:
            grid = prof.profile_skewness(data, fam, _grid(args.grid), "cp" if args.axis == "gamma" else "dp",
                                         twice=not args.once)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        try:
            grid = prof.profile_nu(data, fam, _grid(args.grid), None if args.grid2 is None else _grid(args.grid2))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    out = args.out or "profile.csv"
    grid.to_csv(out)
    print(f"profile {args.axis}: {len(grid.loglik)} points, argmax {grid.argmax.tolist()} -> {out}")
    return EXIT_OK


def cmd_recover(args) -> int:
    family = Family.parse(args.family or "cst")
    truth = _truth(args, family)
    sampler = {"iterations": 6000, "burn_in": 2000, "thin": 4}
    for k, v in SAMPLER_FLAGS.items():
        if k != "chains" and getattr(args, k, None) is not None:
            sampler[v] = getattr(args, k)
    prior = PriorSpec.from_dict(_read_json(args.prior)) if args.prior else PriorSpec()
    scen = Scenario(family, n=args.n, R=args.replicas, truth=truth, prior=prior,
                    config=SamplerConfig.from_dict(sampler), seed=args.seed or 0)
    rep = run_recovery(scen, workers=worker_count())
    out = args.out or "recovery.csv"
    rep.to_csv(out)
    rep.replicas_to_csv(os.path.splitext(out)[0] + "_replicas.csv")
    print(f"recover {family.value}: {len(rep.replicas)} replicas ({len(rep.failures)} failed) -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def _add_common(p, data=True):
    if data:
        p.add_argument("data", help="CSV file with a header row")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--response", help="response column (default: first column)")
    p.add_argument("--covariates", help="comma-separated covariate columns, or 'all'")
    p.add_argument("--center", action="store_true", help="mean-center covariates")
    p.add_argument("--no-intercept", action="store_true", dest="no_intercept")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--prior", help="JSON file of prior hyperparameters")


def _add_sampler(p):
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--seed", type=int)


def _add_truth(p):
    p.add_argument("--beta", help="comma-separated coefficients")
    p.add_argument("--sigma2", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--nu", help="comma-separated shape values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csmsn", description="Bayesian CSMSN regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="run the sampler and write chain, report and residual tables")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--n-sims", type=int, dest="n_sims", help="envelope simulations")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="rebuild report.json from a saved chain")
    p.add_argument("chain", help="chain.csv written by fit")
    p.add_argument("data", help="the CSV used for the fit")
    p.add_argument("--out", help="output directory (default: the chain's directory)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="simulate a regression dataset")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON with a 'truth' object")
    _add_truth(p)
    p.add_argument("--out", help="output CSV (default data.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="profiled relative log-likelihood grid")
    _add_common(p)
    p.add_argument("--axis", choices=["gamma", "lam", "nu"], default="gamma")
    p.add_argument("--grid", help="lo:hi:count or comma list")
    p.add_argument("--grid2", help="second shape axis for two-parameter families")
    p.add_argument("--once", action="store_true", help="emit the 1x (not twice) skewness profile")
    p.add_argument("--out", help="output CSV (default profile.csv)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("recover", help="desk-scale parameter recovery study")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--replicas", type=int, default=10)
    p.add_argument("--prior", help="JSON file of prior hyperparameters")
    p.add_argument("--config", help="JSON with a 'truth' object")
    _add_truth(p)
    _add_sampler(p)
    p.add_argument("--out", help="output CSV (default recovery.csv)")
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"csmsn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"csmsn {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParameterError) as exc:
        print(f"csmsn {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
