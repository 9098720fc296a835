"""Command-line entry point: simulate, sweep, energies, analyze."""
from __future__ import annotations

import argparse
import ast
import csv
import json
import logging
import math
import operator
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (DetectorSettings, W_theory, analyze_trace, compute_W, detect_leakage_windows,
                       single_step)
from .config import parse_config, to_dict
from .linalg import ValidationError
from .model import DeviceParams, eigenenergy_sweep, ghz, minimum_gap, sweep_to_csv_rows
from .noise import NoiseModel
from .protocol import ExperimentConfig, ReadoutTrace, derive_seed, run_experiment

log = logging.getLogger("qutrit_leakage")

SWEEP_PARAMS = ("theta", "t1_us", "chi", "zeta")

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def number(text: str) -> float:
    """Float literal or arithmetic with ``pi``, e.g. ``3*pi/8``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(text)
    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def number_list(text: str) -> list[float]:
    return [number(x) for x in text.split(",") if x.strip()]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(type(x))


def write_json(path: Path, obj) -> Path:
    # inf is not valid JSON; callers map it to null or a string first
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False,
                               default=_json_default) + "\n")
    json.loads(path.read_text())
    return path


def write_manifest(out_dir: Path, command: str, config: dict | None, seed, started: str,
                   files: list[Path]) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "started": started,
        "finished": _now(),
        "outputs": sorted(str(p.relative_to(out_dir)) for p in files),
    }
    return write_json(out_dir / "manifest.json", manifest)


def _write_validated_trace(trace: ReadoutTrace, path: Path) -> Path:
    trace.write_csv(path)
    back = ReadoutTrace.read_csv(path)
    if not np.array_equal(back.outcomes, trace.outcomes):
        raise OSError(f"{path}: re-read trace does not match")
    return path


def _config_from_args(args) -> ExperimentConfig:
    return parse_config(
        args.config, seed=args.seed, n_cycles=args.cycles, theta=args.theta, T1_us=args.t1_us,
        readout=args.readout, log_populations=True if args.log_populations else None,
    )


def _summary(config: ExperimentConfig, trace: ReadoutTrace) -> dict:
    step = single_step(trace.outcomes)
    out = {
        "config": to_dict(config),
        "seed": int(config.seed),
        "phi": list(trace.phi) if trace.phi is not None else None,
        "n_cycles": len(trace),
        "counts": {str(k): int(np.sum(trace.outcomes == k)) for k in range(3)},
        "final_step": step if step < len(trace) else None,
    }
    if trace.populations is not None:
        out["leakage_windows"] = [
            [w.start, w.end] for w in detect_leakage_windows(trace, mode="ground_truth")
        ]
    return out


# ------------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    started = _now()
    config = _config_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_experiment(config)
    files = [
        _write_validated_trace(trace, out / "trace.csv"),
        write_json(out / "summary.json", _summary(config, trace)),
    ]
    write_manifest(out, "simulate", to_dict(config), config.seed, started, files)
    print(f"wrote {len(trace)} cycles to {out / 'trace.csv'}")
    return 0


def _point_config(base: ExperimentConfig, param: str, value: float, seed: int) -> ExperimentConfig:
    if param == "theta":
        cfg = replace(base, cz=base.cz.with_theta(value))
    elif param == "t1_us":
        cfg = replace(base, noise=NoiseModel(T1=value, enabled=base.noise.enabled))
    elif param in ("chi", "zeta"):
        cfg = replace(base, cz=replace(base.cz, **{param: (value,) * 4}))
    else:
        raise ValidationError(f"cannot sweep {param!r}; choose from {SWEEP_PARAMS}")
    return replace(cfg, seed=seed)


def _leak_W(trace: ReadoutTrace, settings: DetectorSettings):
    """Pooled W over leakage windows (ground truth if logged, else detected)."""
    windows = detect_leakage_windows(trace, settings)
    gaps = []
    for w in windows:
        ones = np.flatnonzero(trace.outcomes[w.start:w.end + 1] == 1)
        gaps.extend(np.diff(ones))
    return (float(np.mean(gaps)) if gaps else None), len(windows)


def _run_point(job):
    i, j, value, cfg, path = job
    trace = run_experiment(cfg)
    _write_validated_trace(trace, Path(path))
    theta = cfg.cz.theta
    ws = 2.0 * cfg.noise.T1 * 1000.0 / cfg.schedule.t_cycle
    w_leak, n_windows = _leak_W(trace, DetectorSettings(W_star=ws))
    return {
        "index": i, "seed_index": j, "value": value, "seed": cfg.seed, "theta": theta,
        "W_measured": w_leak, "W_theory": W_theory(theta), "n_windows": n_windows,
        "W_trace": compute_W(trace.outcomes), "trace": Path(path).name,
    }


def cmd_sweep(args) -> int:
    started = _now()
    base = _config_from_args(args)
    values = args.values
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, v in enumerate(values):
        for j in range(args.seeds):
            seed = derive_seed(base.seed, i * args.seeds + j)
            cfg = _point_config(base, args.param, v, seed)
            jobs.append((i, j, v, cfg, str(out / f"trace_{i:03d}_{j:03d}.csv")))
    workers = args.jobs or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(job) for job in jobs]

    stats = out / "stats.csv"
    with open(stats, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        extra = [] if args.param == "theta" else [args.param]
        w.writerow(["theta", "seed", "W_measured", "W_theory", "n_windows", *extra, "trace"])
        for r in rows:
            w.writerow([
                format(r["theta"], ".17g"), r["seed"],
                "" if r["W_measured"] is None else format(r["W_measured"], ".17g"),
                "inf" if math.isinf(r["W_theory"]) else format(r["W_theory"], ".17g"),
                r["n_windows"], *([format(r["value"], ".17g")] if extra else []), r["trace"],
            ])
    files = [stats] + [out / r["trace"] for r in rows]
    cfg_echo = to_dict(base)
    cfg_echo["sweep"] = {"param": args.param, "values": values, "seeds": args.seeds}
    write_manifest(out, "sweep", cfg_echo, base.seed, started, files)
    print(f"wrote {len(rows)} traces and {stats}")
    return 0


def cmd_energies(args) -> int:
    started = _now()
    p = DeviceParams.from_ghz(eps1=args.start_ghz, eps2=args.eps2_ghz, eta1=args.eta_ghz,
                              eta2=args.eta_ghz, g=args.g_ghz)
    n = int(round((args.stop_ghz - args.start_ghz) * 1000.0 / args.step_mhz)) + 1
    grid_ghz = args.start_ghz + np.arange(n) * args.step_mhz / 1000.0
    grid = ghz(grid_ghz)
    rows = eigenenergy_sweep(p, grid)
    header, body = sweep_to_csv_rows(rows)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "energies.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([[format(x, ".17g") for x in r] for r in body])
    at, gap, _ = minimum_gap(p, grid)
    marker = {"pair": ["11", "20"], "eps1_GHz": at / (2 * math.pi), "gap_MHz": gap / (2 * math.pi) * 1e3}
    files = [path, write_json(out / "min_gap.json", marker)]
    write_manifest(out, "energies", {"start_GHz": args.start_ghz, "stop_GHz": args.stop_ghz,
                                     "step_MHz": args.step_mhz, "eps2_GHz": args.eps2_ghz,
                                     "eta_GHz": args.eta_ghz, "g_GHz": args.g_ghz},
                   None, started, files)
    print(f"minimum |11>-|20> gap {marker['gap_MHz']:.3f} MHz at eps1/2pi = {marker['eps1_GHz']:.4f} GHz")
    return 0


def cmd_analyze(args) -> int:
    started = _now()
    trace = ReadoutTrace.read_csv(args.trace)
    config = _config_from_args(args)
    theta = config.cz.theta
    report = analyze_trace(trace, theta, config.noise.T1, config.schedule.t_cycle)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_json(out / "report.json", report)
    write_manifest(out, "analyze", to_dict(config), None, started, [path])
    print(f"{len(report['windows'])} window(s); report at {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qutrit-leakage", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", type=Path, help="TOML config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--cycles", type=int)
        p.add_argument("--theta", type=number, help="xi2 - xi1 in rad; accepts e.g. pi/4")
        p.add_argument("--t1-us", type=float)
        p.add_argument("--readout", choices=("ternary", "binary"))
        p.add_argument("--log-populations", action="store_true")
        p.add_argument("--out-dir", default=out_default)
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")

    p = sub.add_parser("simulate", help="run one experiment")
    common(p, "run")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid over one parameter x seeds")
    common(p, "sweep")
    p.add_argument("--param", choices=SWEEP_PARAMS, default="theta")
    p.add_argument("--values", type=number_list, required=True,
                   help="comma-separated, e.g. 0,pi/8,pi/4,pi/2,pi")
    p.add_argument("--seeds", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("energies", help="labeled two-qutrit spectrum vs ancilla frequency")
    p.add_argument("--start-ghz", type=float, default=5.5)
    p.add_argument("--stop-ghz", type=float, default=6.5)
    p.add_argument("--step-mhz", type=float, default=1.0)
    p.add_argument("--eps2-ghz", type=float, default=6.0)
    p.add_argument("--eta-ghz", type=float, default=0.2)
    p.add_argument("--g-ghz", type=float, default=0.025)
    p.add_argument("--out-dir", default="energies")
    p.set_defaults(func=cmd_energies)

    p = sub.add_parser("analyze", help="leakage windows and W statistics for a trace CSV")
    p.add_argument("trace", type=Path)
    common(p, "analysis")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
