"""Batch experiment driver emitting CSV/JSON result files."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from . import analytic, bounds, density_evolution as de, optimizer, pathloss, simulator
from .model import (ConfigError, PowerModel, RepetitionDistribution, SystemConfig,
                    edge_perspective)

log = logging.getLogger("irsa_pc")

COMMANDS = ("simulate", "de-sweep", "capacity", "bounds", "optimize", "pathloss",
            "discretize", "sa-analytic")
TOP_KEYS = {"command", "system", "sweep", "trials", "seed", "output", "pathloss", "rows",
            "optimize", "delta", "g", "threads"}
DEFAULT_SYSTEM = {
    "slots": 1000, "load": 1.0, "beta": 2.0, "k": 5, "power_levels": [10.0, 1.0],
    "power_probs": [0.4, 0.6], "repetition": {2: 0.5, 3: 0.28, 8: 0.22},
}
DEFAULT_ROWS = [
    {"label": "liva", "repetition": {2: 0.5, 3: 0.28, 8: 0.22}, "delta": 1.0},
    {"label": "liva", "repetition": {2: 0.5, 3: 0.28, 8: 0.22}, "delta": 0.4},
    {"label": "lambda1", "repetition": {2: 0.56, 3: 0.21, 8: 0.23}, "delta": 0.4},
    {"label": "lambda2", "repetition": {2: 0.6, 3: 0.2, 8: 0.2}, "delta": 0.6},
]
OPT_KEYS = {"support", "levels", "fix_delta", "fix_lambda", "population", "generations",
            "mutation_factor", "crossover", "g_max"}


@dataclass
class ExperimentSpec:
    command: str
    system: SystemConfig
    sweep: Optional[tuple[float, float, float]] = None
    trials: int = 100
    seed: int = 1
    output_path: Optional[str] = None
    pathloss: Optional[pathloss.PathLossConfig] = None
    rows: list = field(default_factory=list)
    optimize: dict = field(default_factory=dict)
    delta: Optional[float] = None
    g: Optional[float] = None
    threads: int = 1


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _sweep(d: Any) -> tuple[float, float, float]:
    _require(isinstance(d, dict), "sweep: expected a mapping with g_start, g_end, g_step")
    unknown = set(d) - {"g_start", "g_end", "g_step"}
    _require(not unknown, f"sweep: unknown key(s) {sorted(unknown)}")
    for key in ("g_start", "g_end", "g_step"):
        _require(key in d, f"sweep: missing key '{key}'")
    s = tuple(float(d[k]) for k in ("g_start", "g_end", "g_step"))
    _require(s[2] > 0, "sweep.g_step must be > 0")
    _require(s[0] >= 0 and s[1] >= s[0], "sweep: need 0 <= g_start <= g_end")
    return s


def validate(spec_text: str) -> ExperimentSpec:
    """Parse and check an experiment file; unknown keys are rejected."""
    try:
        raw = yaml.safe_load(spec_text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    if raw is None:
        raw = {}
    _require(isinstance(raw, dict), "top level must be a mapping")
    unknown = set(raw) - TOP_KEYS
    _require(not unknown, f"unknown key(s) {sorted(unknown)}")
    cmd = raw.get("command")
    _require(cmd in COMMANDS, f"command: expected one of {list(COMMANDS)}, got {cmd!r}")
    sys_raw = raw.get("system", DEFAULT_SYSTEM)
    _require(isinstance(sys_raw, dict), "system: expected a mapping")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        system = SystemConfig.from_dict(sys_raw)
    for w in caught:
        log.warning("%s", w.message)
    spec = ExperimentSpec(cmd, system)
    if "sweep" in raw:
        spec.sweep = _sweep(raw["sweep"])
    try:
        spec.trials = int(raw.get("trials", 100))
        spec.seed = int(raw.get("seed", 1))
        spec.threads = int(raw.get("threads", 1))
        spec.delta = None if raw.get("delta") is None else float(raw["delta"])
        spec.g = None if raw.get("g") is None else float(raw["g"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scalar: {exc}") from None
    _require(spec.trials >= 1, "trials must be >= 1")
    _require(spec.threads >= 1, "threads must be >= 1")
    spec.output_path = raw.get("output")
    if "pathloss" in raw:
        _require(isinstance(raw["pathloss"], dict), "pathloss: expected a mapping")
        spec.pathloss = pathloss.PathLossConfig.from_dict(raw["pathloss"])
    if "rows" in raw:
        _require(isinstance(raw["rows"], list), "rows: expected a list")
        for i, row in enumerate(raw["rows"]):
            _require(isinstance(row, dict) and set(row) <= {"label", "repetition", "delta"},
                     f"rows[{i}]: expected keys label, repetition, delta")
            _require("repetition" in row and "delta" in row, f"rows[{i}]: missing repetition/delta")
        spec.rows = raw["rows"]
    if "optimize" in raw:
        opt = raw["optimize"] or {}
        _require(isinstance(opt, dict), "optimize: expected a mapping")
        unknown = set(opt) - OPT_KEYS
        _require(not unknown, f"optimize: unknown key(s) {sorted(unknown)}")
        spec.optimize = dict(opt)
    if cmd in ("simulate", "pathloss", "de-sweep") and spec.sweep is None and spec.g is None:
        raise ConfigError(f"{cmd}: missing 'sweep'")
    if cmd in ("pathloss", "discretize") and spec.pathloss is None:
        spec.pathloss = pathloss.PathLossConfig()
    return spec


def atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(spec: ExperimentSpec, text: str):
    if spec.output_path:
        atomic_write(spec.output_path, text)
    else:
        sys.stdout.write(text)


def _with_delta(cfg: SystemConfig, delta: Optional[float]) -> SystemConfig:
    if delta is None:
        return cfg
    pm = cfg.power
    return cfg.with_power(PowerModel.dpc(delta, pm.beta, pm.gap_factor))


def _loads(spec: ExperimentSpec) -> np.ndarray:
    if spec.sweep is None:
        return np.array([spec.g])
    return simulator.load_grid(*spec.sweep)


def _peak(rows) -> str:
    g, est = max(rows, key=lambda r: r[1].mean_throughput)
    return f"peak throughput {est.mean_throughput:.4f} at g={g:g}"


def run(spec: ExperimentSpec) -> str:
    """Execute one experiment; returns the summary line."""
    cfg = _with_delta(spec.system, spec.delta)
    cmd = spec.command
    if cmd in ("simulate", "pathloss"):
        channel = spec.pathloss if cmd == "pathloss" else None
        if cmd == "pathloss":
            disc = pathloss.discretize(spec.pathloss, cfg.power.gap_factor, cfg.power.beta)
            cfg = cfg.with_power(disc.power_model(cfg.power.beta, cfg.power.gap_factor))
        rows = simulator.sweep(cfg, _loads(spec), spec.trials, spec.seed, channel, spec.threads)
        _emit(spec, simulator.sweep_csv(rows))
        return _peak(rows)
    if cmd == "de-sweep":
        if spec.sweep is None:
            p_inf, conv, trace = de.run_de(de.DEParameters(spec.g, cfg.repetition, cfg.power))
            _emit(spec, de.trace_csv(trace))
            return f"p_inf {p_inf:.6g} after {len(trace)} iterations (converged={conv})"
        res = de.de_sweep(cfg.power, cfg.repetition, _loads(spec))
        lines = ["g,throughput,packet_loss"] + [f"{g!r},{T!r},{pl!r}" for g, T, pl in res]
        _emit(spec, "\n".join(lines) + "\n")
        g, T, _ = max(res, key=lambda r: r[1])
        return f"peak throughput {T:.4f} at g={g:g}"
    if cmd == "capacity":
        c = de.capacity(cfg.power, cfg.repetition)
        if spec.output_path:
            atomic_write(spec.output_path, json.dumps(
                {"capacity": c, "delta": list(cfg.power.choice),
                 "repetition": {str(l): v for l, v in cfg.repetition.coefficients.items()}},
                indent=2) + "\n")
        return f"capacity {c:.4f}"
    if cmd == "bounds":
        reports = [bounds.bound_report(RepetitionDistribution({int(l): float(v) for l, v in
                                                               r["repetition"].items()}),
                                       float(r["delta"]), str(r.get("label", "")))
                   for r in (spec.rows or DEFAULT_ROWS)]
        _emit(spec, bounds.bounds_csv(reports))
        return f"{len(reports)} bound rows"
    if cmd == "optimize":
        res = _optimize(spec)
        text = json.dumps(res.to_json(), indent=2) + "\n"
        _emit(spec, text)
        return f"best g {res.best_g:.4f} (feasible={res.feasible})"
    if cmd == "discretize":
        disc = pathloss.discretize(spec.pathloss, cfg.power.gap_factor, cfg.power.beta)
        text = json.dumps({"n": disc.n, "levels": list(disc.power_levels),
                           "delta": list(disc.delta), "distances": list(disc.distances)},
                          indent=2) + "\n"
        _emit(spec, text)
        return f"n={disc.n} delta=" + ",".join(f"{v:.4f}" for v in disc.delta)
    if cmd == "sa-analytic":
        delta = spec.delta if spec.delta is not None else float(cfg.power.delta[0])
        if spec.g is None and spec.sweep is None:
            g, d, T = analytic.sa_dpc_optimum()
            return f"optimum throughput {T:.4f} at g={g:.4f} delta={d:.4f}"
        if spec.sweep is not None:
            lines = ["g,throughput,high,low"]
            for g in _loads(spec):
                r = analytic.sa_dpc_throughput(float(g), delta)
                lines.append(f"{float(g)!r},{r.throughput!r},{r.components[0]!r},{r.components[1]!r}")
            _emit(spec, "\n".join(lines) + "\n")
            return f"{len(lines) - 1} load points"
        r = analytic.sa_dpc_throughput(spec.g, delta)
        return f"throughput {r.throughput:.4f}"
    raise ConfigError(f"unknown command {cmd}")


def _optimize(spec: ExperimentSpec) -> optimizer.OptimizationResult:
    o = spec.optimize
    support = tuple(int(v) for v in o.get("support", (2, 3, 8)))
    levels = int(o.get("levels", 2))
    fix_delta = o.get("fix_delta")
    if fix_delta is not None:
        fix_delta = tuple(float(v) for v in np.atleast_1d(fix_delta))
        if len(fix_delta) == 1 and levels == 2:
            fix_delta = (fix_delta[0], 1.0 - fix_delta[0])
    fix_lambda = o.get("fix_lambda")
    if fix_lambda is not None:
        node = RepetitionDistribution({int(l): float(v) for l, v in fix_lambda.items()})
        support = tuple(int(l) for l in node.degrees)
        fix_lambda = tuple(edge_perspective(node).probs)
    problem = optimizer.OptimizationProblem(
        support=support, n_levels=levels, beta=spec.system.power.beta,
        k=spec.system.power.gap_factor, fixed_delta=fix_delta, fixed_lambda=fix_lambda,
        g_bounds=(0.05, float(o.get("g_max", 3.0))))
    settings = optimizer.OptimizerSettings(
        population=int(o.get("population", 50)), generations=int(o.get("generations", 300)),
        mutation_factor=float(o.get("mutation_factor", 0.8)),
        crossover=float(o.get("crossover", 0.9)), seed=spec.seed, workers=spec.threads)
    return optimizer.optimize(problem, settings)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irsa-pc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="experiment file (YAML/JSON)")
        sp.add_argument("--out", help="output file (written atomically)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--delta", type=float, help="two-level high-power probability")
        sp.add_argument("--g", type=float, help="single load point")
        if name == "optimize":
            sp.add_argument("--deg", type=int, help="max degree; support becomes 2..deg")
            sp.add_argument("--support", help="comma-separated degree support, e.g. 2,3,8")
            sp.add_argument("--levels", type=int)
            sp.add_argument("--fix-delta", type=float)
            sp.add_argument("--fix-lambda", help="node distribution, e.g. 2:0.5,3:0.28,8:0.22")
            sp.add_argument("--pop", type=int)
            sp.add_argument("--gens", type=int)
    return ap


def _spec_from_args(args) -> ExperimentSpec:
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        raw = yaml.safe_load(text) or {}
        if isinstance(raw, dict) and raw.get("command") not in (None, args.command):
            raise ConfigError(f"config command {raw.get('command')!r} does not match {args.command!r}")
        if isinstance(raw, dict):
            raw["command"] = args.command
        text = yaml.safe_dump(raw)
    else:
        text = yaml.safe_dump({"command": args.command})
    if args.g is not None and args.command in ("simulate", "pathloss", "de-sweep"):
        raw = yaml.safe_load(text)
        raw["g"] = args.g
        raw.pop("sweep", None)
        text = yaml.safe_dump(raw)
    spec = validate(text)
    if args.out:
        spec.output_path = args.out
    if args.seed is not None:
        spec.seed = args.seed
    if args.trials is not None:
        _require(args.trials >= 1, "--trials must be >= 1")
        spec.trials = args.trials
    if args.threads is not None:
        _require(args.threads >= 1, "--threads must be >= 1")
        spec.threads = args.threads
    if args.delta is not None:
        _require(0 <= args.delta <= 1, "--delta must lie in [0, 1]")
        spec.delta = args.delta
    if args.g is not None:
        _require(args.g >= 0, "--g must be >= 0")
        spec.g = args.g
    if args.command == "optimize":
        o = spec.optimize
        if args.deg is not None:
            o["support"] = list(range(2, args.deg + 1))
        if args.support:
            o["support"] = [int(v) for v in args.support.split(",")]
        if args.levels is not None:
            o["levels"] = args.levels
        if args.fix_delta is not None:
            o["fix_delta"] = args.fix_delta
        if args.fix_lambda:
            pairs = [kv.split(":") for kv in args.fix_lambda.split(",")]
            o["fix_lambda"] = {int(k): float(v) for k, v in pairs}
        if args.pop is not None:
            o["population"] = args.pop
        if args.gens is not None:
            o["generations"] = args.gens
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        spec = _spec_from_args(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        summary = run(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
