"""Command-line front end.

Subcommands: ``sacrifice``, ``simulate``, ``sweep``, ``coverage`` and
``check-conditions``.  Configuration is one JSON document; command-line flags
override its values.  Exit status: 0 on success (aborted protocol runs
included), 2 on usage or validation errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import fields

import numpy as np

from . import stats_bounds as sb
from .channel_sim import ChannelModel, expected_counts, protocol_for_raw_key, sample_counts
from .estimation import (
    CountsError,
    EpsilonSchedule,
    NumericalError,
    ObservedCounts,
    ProtocolParams,
    Variant,
    build_omega1,
    check_condition1,
    check_condition2,
    check_condition3,
    pipeline,
    step1_counts,
)
from .interval import ZeroDivisionInterval
from .keyrate import SWEEP_AXES, RateSetup, sweep
from .photon_source import Fixed, Gaussian, moments, omega2

__all__ = ["main", "load_config", "ConfigError", "CSV_HEADER"]

CSV_HEADER = ("mu1", "mu2", "t", "Ms", "beta", "variant", "S", "R", "aborted")

_METHODS = ("auto", "exact", "chernoff-kl", "pinsker", "info-geo")

DEFAULTS = {
    "beta": 80,
    "eta": 1.1,
    "mu1": 0.1,
    "mu2": 0.5,
    "t": 0.0,
    "alpha": 1e-3,
    "p0": 4e-7,
    "s": 0.03,
    "Ms": 10**7,
    "decoy_fraction": 0.1,
    "N0": None,
    "N1": None,
    "N2": None,
    "Ns": None,
    "signal_index": 2,
    "ec_index": None,
    "code_dim": None,
    "variant": "improved",
    "method": "auto",
    "vacuum_q": None,
    "refine_depth": 0,
    "eps_log2": None,
    "theta_set": None,
    "counts": None,
    "grid": None,
    "seed": 0,
    "expected": False,
    "coverage": None,
    "jobs": 1,
    "format": "json",
    "output": None,
}

# full pmf summation is added to the coverage report up to this many trials
EXHAUSTIVE_MAX_N = 5000

COVERAGE_DEFAULTS = {
    "N": 10**4,
    "p": 5e-4,
    "alpha": 1e-3,
    "replicates": 10**6,
    "methods": ["exact", "chernoff-kl"],
}


class ConfigError(ValueError):
    """Invalid configuration or command-line input (exit status 2)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(path: str | None, overrides: dict) -> dict:
    """Merge defaults, the JSON file at ``path`` and non-None ``overrides``."""
    cfg = dict(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg.update(data)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["variant"] not in ("improved", "non-improved"):
        raise ConfigError(f"variant must be improved or non-improved, got {cfg['variant']!r}")
    if cfg["method"] not in _METHODS:
        raise ConfigError(f"method must be one of {_METHODS}, got {cfg['method']!r}")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if not isinstance(cfg["beta"], int) or cfg["beta"] < 1:
        raise ConfigError("beta must be a positive integer")
    if int(cfg["jobs"]) < 1:
        raise ConfigError("jobs must be positive")
    if cfg["grid"] is not None:
        if not isinstance(cfg["grid"], dict):
            raise ConfigError("grid must be an object of axis -> list")
        bad = sorted(set(cfg["grid"]) - set(SWEEP_AXES))
        if bad:
            raise ConfigError(f"unknown grid axes: {bad}")
    if cfg["eps_log2"] is not None:
        bad = sorted(set(cfg["eps_log2"]) - set(EpsilonSchedule.names()))
        if bad:
            raise ConfigError(f"unknown eps_log2 keys: {bad}")
    if cfg["coverage"] is not None:
        bad = sorted(set(cfg["coverage"]) - set(COVERAGE_DEFAULTS))
        if bad:
            raise ConfigError(f"unknown coverage keys: {bad}")


# settings that do not change results stay out of the provenance hash
_UNHASHED = ("output", "jobs")


def config_hash(cfg: dict) -> str:
    """First 16 hex digits of the SHA-256 of the canonical effective config."""
    kept = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    blob = json.dumps(kept, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _laws(mu1, mu2, t):
    if t and t > 0.0:
        return Gaussian(mu1, t), Gaussian(mu2, t)
    return Fixed(mu1), Fixed(mu2)


def _model(cfg) -> ChannelModel:
    l1, l2 = _laws(cfg["mu1"], cfg["mu2"], cfg["t"])
    return ChannelModel(cfg["alpha"], cfg["p0"], cfg["s"], l1, l2)


def _params(cfg, model) -> ProtocolParams:
    base = protocol_for_raw_key(model, int(cfg["Ms"]), beta=cfg["beta"],
                                decoy_fraction=cfg["decoy_fraction"],
                                signal_index=cfg["signal_index"], eta=cfg["eta"],
                                code_dim=cfg["code_dim"])
    kw = {k: int(cfg[k]) for k in ("N0", "N1", "N2", "Ns") if cfg[k] is not None}
    if not kw:
        return base
    vals = {f.name: getattr(base, f.name) for f in fields(base)}
    vals.update(kw)
    return ProtocolParams(**vals)


def _schedule(cfg):
    sched = EpsilonSchedule.for_variant(cfg["variant"], cfg["beta"])
    if cfg["eps_log2"]:
        vals = {n: getattr(sched, n) for n in EpsilonSchedule.names()}
        vals.update({k: 2.0 ** (-float(v)) for k, v in cfg["eps_log2"].items()})
        sched = EpsilonSchedule(**vals)
    return sched


def _theta_set(cfg):
    if not cfg["theta_set"]:
        return None
    out = []
    for item in cfg["theta_set"]:
        bad = set(item) - {"mu1", "mu2", "t"}
        if bad:
            raise ConfigError(f"unknown theta_set keys: {sorted(bad)}")
        out.append(_laws(item["mu1"], item["mu2"], item.get("t", 0.0)))
    return out


def _counts_from(obj) -> ObservedCounts:
    if isinstance(obj, dict) and "counts" in obj and isinstance(obj["counts"], dict):
        obj = obj["counts"]
    if not isinstance(obj, dict):
        raise ConfigError("counts must be an object")
    keys = {"Ms", "M0", "M1", "M2", "M3", "M4"}
    bad = set(obj) - keys
    if bad:
        raise ConfigError(f"unknown count keys: {sorted(bad)}")
    missing = {"Ms", "M0", "M1", "M2", "M3"} - set(obj)
    if missing:
        raise ConfigError(f"missing count keys: {sorted(missing)}")
    try:
        return ObservedCounts(**{k: obj[k] for k in obj})
    except CountsError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_counts(cfg, args, model, params):
    if getattr(args, "counts", None):
        try:
            with open(args.counts, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read counts {args.counts}: {exc}") from exc
        if isinstance(data, dict) and isinstance(data.get("params"), dict):
            params = _params_from_dict(params, data["params"])
        return _counts_from(data), params, "file"
    if cfg["counts"] is not None:
        return _counts_from(cfg["counts"]), params, "inline"
    return expected_counts(model, params, int(cfg["Ms"])), params, "expected"


def _params_from_dict(params, d):
    vals = {f.name: getattr(params, f.name) for f in fields(params)}
    for k in ("N0", "N1", "N2", "Ns"):
        if k in d:
            vals[k] = int(d[k])
    return ProtocolParams(**vals)


def _params_dict(p: ProtocolParams) -> dict:
    return {"beta": p.beta, "N0": p.N0, "N1": p.N1, "N2": p.N2, "Ns": p.Ns,
            "signal_index": p.signal_index, "eta": p.eta, "code_dim": p.code_dim}


def _counts_dict(c: ObservedCounts) -> dict:
    return {k: getattr(c, k) for k in ("Ms", "M0", "M1", "M2", "M3", "M4")}


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    return obj


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_sacrifice(cfg, args) -> int:
    model = _model(cfg)
    params = _params(cfg, model)
    counts, params, source = _resolve_counts(cfg, args, model, params)
    try:
        counts.validate(params)
    except CountsError as exc:
        raise ConfigError(str(exc)) from exc
    res = pipeline(params, counts, sched=_schedule(cfg), method=cfg["method"],
                   variant=cfg["variant"], adjust=cfg["vacuum_q"],
                   theta_set=_theta_set(cfg), refine_depth=int(cfg["refine_depth"]))
    out = res.to_dict()
    out.update({"config_hash": config_hash(cfg), "params": _params_dict(params),
                "counts": _counts_dict(counts), "counts_source": source})
    _emit(_json(out), cfg["output"])
    return 0


def cmd_simulate(cfg, args) -> int:
    model = _model(cfg)
    params = _params(cfg, model)
    if cfg["expected"]:
        counts, mode = expected_counts(model, params, int(cfg["Ms"])), "expected"
    else:
        counts, mode = sample_counts(model, params, int(cfg["seed"])), "sampled"
    out = {"config_hash": config_hash(cfg), "mode": mode, "seed": int(cfg["seed"]),
           "params": _params_dict(params), "counts": _counts_dict(counts)}
    _emit(_json(out), cfg["output"])
    return 0


def cmd_sweep(cfg, args) -> int:
    grid = cfg["grid"]
    if not grid or any(not isinstance(v, list) or not v for v in grid.values()):
        raise ConfigError("sweep needs a nonempty grid")
    setup = RateSetup(alpha=cfg["alpha"], p0=cfg["p0"], s=cfg["s"], eta=cfg["eta"],
                      beta=cfg["beta"], mu1=cfg["mu1"], mu2=cfg["mu2"], t=cfg["t"],
                      Ms=int(cfg["Ms"]), decoy_fraction=cfg["decoy_fraction"],
                      signal_index=cfg["signal_index"], ec_index=cfg["ec_index"],
                      variant=cfg["variant"], method=cfg["method"],
                      refine_depth=int(cfg["refine_depth"]))
    points = sweep(grid, setup, jobs=int(cfg["jobs"]))
    if cfg["format"] == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in points:
            w.writerow([repr(v) if isinstance(v, float) else str(v).lower()
                        if isinstance(v, bool) else v for v in p.row()])
        _emit(buf.getvalue(), cfg["output"])
    else:
        rows = [dict(zip(CSV_HEADER, p.row())) for p in points]
        _emit(_json({"config_hash": config_hash(cfg), "points": rows}), cfg["output"])
    return 0


def coverage_report(N: int, p: float, alpha: float, replicates: int, methods, seed: int) -> dict:
    """Monte Carlo violation frequencies of the percent-point and interval contracts.

    The standard error is ``sqrt(alpha (1 - alpha) / replicates)`` and a
    contract passes when its frequency is at most ``alpha + 3 SE``.  For
    ``N <= EXHAUSTIVE_MAX_N`` the exact violation probabilities are added.
    """
    if replicates < 1:
        raise ConfigError("replicates must be positive")
    if not 1e-4 <= alpha < 1.0:
        raise ConfigError("coverage alpha must lie in [1e-4, 1)")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64))
    draws = rng.binomial(N, p, size=replicates)
    values, freq = np.unique(draws, return_counts=True)
    se = math.sqrt(alpha * (1.0 - alpha) / replicates)
    model = sb.BinomialModel(N, p)
    report = {}
    for name in methods:
        m = sb.BoundMethod.parse(name)
        entry = {}
        try:
            lo = sb.percent_point_lower(model, alpha, m)
            hi = sb.percent_point_upper(model, alpha, m)
            entry["percent_point_lower"] = float(np.mean(draws < lo))
            entry["percent_point_upper"] = float(np.mean(draws > hi))
        except sb.MethodDomainError:
            pass
        bad_lo = bad_hi = 0
        for v, f in zip(values.tolist(), freq.tolist()):
            try:
                if p < sb.interval_lower(N, v, alpha, m):
                    bad_lo += f
                if p > sb.interval_upper(N, v, alpha, m):
                    bad_hi += f
            except sb.MethodDomainError:
                continue
        entry["interval_lower"] = bad_lo / replicates
        entry["interval_upper"] = bad_hi / replicates
        report[m.value] = {
            k: {"violation_rate": v, "bound": alpha + 3.0 * se, "passed": v <= alpha + 3.0 * se}
            for k, v in entry.items()
        }
    out = {"N": N, "p": p, "alpha": alpha, "replicates": replicates, "seed": seed,
           "standard_error": se, "results": report}
    if N <= EXHAUSTIVE_MAX_N:
        out["exhaustive"] = {
            sb.BoundMethod.parse(name).value: {
                k: {"violation_prob": v, "passed": v <= alpha}
                for k, v in sb.coverage_exhaustive(N, p, alpha, name).items()
            }
            for name in methods
        }
    return out


def cmd_coverage(cfg, args) -> int:
    cov = dict(COVERAGE_DEFAULTS)
    cov.update(cfg["coverage"] or {})
    if getattr(args, "replicates", None) is not None:
        cov["replicates"] = args.replicates
    if cfg["method"] != "auto":
        cov["methods"] = [cfg["method"]]
    rep = coverage_report(int(cov["N"]), float(cov["p"]), float(cov["alpha"]),
                          int(cov["replicates"]), cov["methods"], int(cfg["seed"]))
    rep["config_hash"] = config_hash(cfg)
    _emit(_json(rep), cfg["output"])
    return 0


def cmd_check_conditions(cfg, args) -> int:
    model = _model(cfg)
    params = _params(cfg, model)
    counts, params, source = _resolve_counts(cfg, args, model, params)
    try:
        counts.validate(params)
    except CountsError as exc:
        raise ConfigError(str(exc)) from exc
    sched = _schedule(cfg)
    method = cfg["method"]
    depth = int(cfg["refine_depth"])
    box = build_omega1(params, moments(params.law1), moments(params.law2), sched, method,
                       w2=omega2(params.law1))
    Mh = step1_counts(params, counts, sched, method)
    q0 = Mh.M0 / params.N0
    reports = [check_condition1(box), check_condition2(Mh, q0, box, depth),
               check_condition3(Mh, q0, box, depth)]
    out = {
        "config_hash": config_hash(cfg),
        "counts_source": source,
        "params": _params_dict(params),
        "all_passed": all(r.passed for r in reports),
        "conditions": {r.name: {"passed": r.passed, "margins": r.margins, "detail": r.detail}
                       for r in reports},
    }
    _emit(_json(out), cfg["output"])
    return 0


_COMMANDS = {
    "sacrifice": cmd_sacrifice,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "coverage": cmd_coverage,
    "check-conditions": cmd_check_conditions,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--variant", choices=("improved", "non-improved"))
    common.add_argument("--method", choices=_METHODS)
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--jobs", type=int, metavar="N")
    common.add_argument("--output", metavar="PATH")
    common.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="finitedecoy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sacrifice", parents=[common], help="sacrifice bit-length from counts")
    p.add_argument("--counts", metavar="PATH", help="counts JSON (e.g. simulate output)")
    p = sub.add_parser("simulate", parents=[common], help="generate counts from the channel model")
    p.add_argument("--expected", action="store_true", default=None,
                   help="emit expected instead of sampled counts")
    sub.add_parser("sweep", parents=[common], help="key-rate curves over a grid")
    p = sub.add_parser("coverage", parents=[common], help="Monte Carlo coverage of the bounds")
    p.add_argument("--replicates", type=int)
    p = sub.add_parser("check-conditions", parents=[common], help="report condition margins")
    p.add_argument("--counts", metavar="PATH")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k, None)
                 for k in ("variant", "method", "seed", "jobs", "output", "format", "expected")}
    try:
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, CountsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ZeroDivisionInterval, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
