"""Command-line entry point for the simulation studies.

Subcommands:

    converge    startup convergence study (per-trial CSV + summary)
    observe     observability sweep over state/input grids (CSV)
    formation   multi-robot pattern formation scenario (trace CSV)
    leader      leader-follower gate-passage scenario (trace CSV)

Every run is deterministic given (config, seed) and writes a manifest.json
listing its artifacts.  Exit codes: 0 success, 1 usage/config error,
2 assertion failure, 3 internal fault.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from importlib import metadata

import numpy as np

from . import observability
from .config import ConfigError, load_scenario
from .sim.scenarios import (
    FormationSpec,
    convergence_study,
    formation_scenario,
    leader_follower_scenario,
)
from .sim.world import ScenarioConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSERTION = 2
EXIT_FAULT = 3

_GRID_VARS = ("x", "y", "psi", "vix", "viy", "ri", "vjx", "vjy", "rj")


def _version() -> str:
    try:
        return metadata.version("relloc")
    except metadata.PackageNotFoundError:
        return "unknown"


def _write_manifest(out_dir, config_path, seed, artifacts, started):
    manifest = {
        "config": str(config_path) if config_path else None,
        "seed": seed,
        "artifacts": sorted(os.path.basename(a) for a in artifacts),
        "tool_version": _version(),
        "runtime_s": round(time.perf_counter() - started, 3),
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _load_config(args) -> ScenarioConfig:
    if args.config:
        cfg, _ = load_scenario(args.config)
    else:
        cfg = ScenarioConfig()
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _write_csv(path, header, rows, schema_note):
    with open(path, "w", newline="") as fh:
        fh.write(f"# relloc {schema_note} v1\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# -- converge --------------------------------------------------------------

def cmd_converge(args) -> int:
    started = time.perf_counter()
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    results = convergence_study(cfg, trials=args.trials)
    rows = []
    for k, r in enumerate(results):
        rows.append([k, r.seed, int(r.converged),
                     "" if r.convergence_time is None else f"{r.convergence_time:.2f}",
                     *("" if v is None else f"{v:.4f}"
                       for v in (r.mae_x, r.mae_y, r.mae_psi))])
    trials_path = os.path.join(args.out, "trials.csv")
    _write_csv(trials_path,
               ["trial", "seed", "converged", "convergence_time_s",
                "mae_x", "mae_y", "mae_psi"],
               rows, "convergence trials")

    times = [r.convergence_time for r in results if r.converged]
    mean_time = float(np.mean(times)) if times else float("nan")
    frac_60 = sum(1 for t in times if t <= 60.0) / len(results)
    summary_path = os.path.join(args.out, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write(f"trials = {len(results)}\n")
        fh.write(f"converged = {len(times)}\n")
        fh.write(f"mean_convergence_time_s = {mean_time:.3f}\n")
        fh.write(f"fraction_converged_by_60s = {frac_60:.3f}\n")
    _write_manifest(args.out, args.config, cfg.seed,
                    [trials_path, summary_path], started)
    print(f"converge: {len(times)}/{len(results)} trials converged, "
          f"mean {mean_time:.1f} s")
    if args.check:
        if not (mean_time < args.mean_limit and frac_60 >= args.frac_limit):
            print("converge: assertion failed", file=sys.stderr)
            return EXIT_ASSERTION
    return EXIT_OK


# -- observe ---------------------------------------------------------------

def _parse_grid(spec: str):
    """Grid spec -> iterable of (X, U) samples.

    Forms: ``random:COUNT[:SEED]``, ``formation-lock:COUNT[:SEED]`` or a
    comma list of var=value / var=lo:hi:count over
    x,y,psi,vix,viy,ri,vjx,vjy,rj (unlisted vars default to 0).
    """
    if spec.startswith(("random:", "formation-lock:")):
        kind, rest = spec.split(":", 1)
        parts = rest.split(":")
        count = int(parts[0])
        seed = int(parts[1]) if len(parts) > 1 else 0
        if count < 1:
            raise ValueError("grid count must be >= 1")
        rng = np.random.default_rng(seed)
        samples = []
        for _ in range(count):
            X = np.array([*rng.uniform(-3.0, 3.0, 2), rng.uniform(-1.0, 1.0)])
            if kind == "random":
                U = np.array([*rng.uniform(-1.0, 1.0, 2),
                              rng.uniform(-0.5, 0.5),
                              *rng.uniform(-1.0, 1.0, 2),
                              rng.uniform(-0.5, 0.5)])
            else:
                v_j = rng.uniform(-1.0, 1.0, 2)
                from .kinematics import rotation
                v_i = rotation(X[2]) @ v_j
                U = np.array([v_i[0], v_i[1], 0.0, v_j[0], v_j[1], 0.0])
            samples.append((X, U))
        return samples

    axes = {v: [0.0] for v in _GRID_VARS}
    for item in spec.split(","):
        if "=" not in item:
            raise ValueError(f"bad grid item {item!r}")
        name, value = item.split("=", 1)
        name = name.strip()
        if name not in _GRID_VARS:
            raise ValueError(f"unknown grid variable {name!r}")
        if ":" in value:
            lo, hi, count = value.split(":")
            axes[name] = list(np.linspace(float(lo), float(hi), int(count)))
        else:
            axes[name] = [float(value)]
    samples = []
    import itertools
    for combo in itertools.product(*(axes[v] for v in _GRID_VARS)):
        samples.append((np.array(combo[:3]), np.array(combo[3:])))
    return samples


def cmd_observe(args) -> int:
    started = time.perf_counter()
    try:
        samples = _parse_grid(args.grid)
    except ValueError as exc:
        print(f"invalid grid: {exc}", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for X, U in samples:
        rep = observability.analyze(X, U, det_threshold=args.det_threshold)
        rows.append([*(f"{v:.6g}" for v in X), *(f"{v:.6g}" for v in U),
                     f"{rep.det_matrix:.6e}", f"{rep.det_closed_form:.6e}",
                     rep.rank, ";".join(sorted(rep.regime_flags))])
    out_path = os.path.join(args.out, "observability.csv")
    _write_csv(out_path, [*_GRID_VARS, "det", "det_closed_form", "rank",
                          "flags"], rows, "observability sweep")
    _write_manifest(args.out, None, None, [out_path], started)
    print(f"observe: wrote {len(rows)} rows")
    return EXIT_OK


# -- formation / leader ----------------------------------------------------

# Demo defaults for the formation subcommand when no config is given: five
# robots, with slots allocated densely enough for ~150 Hz pair ranging.  The
# ranging rate is a simulator knob; the hardware-calibrated default slot
# leaves a 5-robot loop at 30 Hz per pair, which holds patterns noticeably
# less tightly.
FORMATION_DEFAULT_ROBOTS = 5
FORMATION_DEFAULT_SLOT = 1.0 / 1500.0


def cmd_formation(args) -> int:
    started = time.perf_counter()
    if args.config is None:
        cfg = ScenarioConfig(n_robots=FORMATION_DEFAULT_ROBOTS,
                             slot_time=FORMATION_DEFAULT_SLOT,
                             seed=args.seed if args.seed is not None else 0)
    else:
        cfg = _load_config(args)
    if cfg.n_robots < 2:
        print("formation needs at least 2 robots", file=sys.stderr)
        return EXIT_USAGE
    raw = load_scenario(args.config)[1] if args.config else {}
    form = raw.get("formation", {})
    spec = FormationSpec(
        offsets=tuple(tuple(o) for o in form["offsets"])
        if "offsets" in form else FormationSpec().offsets)
    os.makedirs(args.out, exist_ok=True)
    result = formation_scenario(cfg, spec)
    n = cfg.n_robots
    trace_path = os.path.join(args.out, "trace.csv")
    header = ["t"] + [f"{ax}{i}" for i in range(n) for ax in ("x", "y")]
    _write_csv(trace_path, header,
               [[f"{v:.4f}" for v in row] for row in result.trace],
               "formation trace")
    summary_path = os.path.join(args.out, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write(f"max_axis_error_m = {result.max_axis_error:.4f}\n")
        for i, (ex, ey) in enumerate(result.offset_errors, start=1):
            fh.write(f"robot{i}_offset_error_m = {ex:.4f} {ey:.4f}\n")
    _write_manifest(args.out, args.config, cfg.seed,
                    [trace_path, summary_path], started)
    print(f"formation: max axis error {result.max_axis_error:.3f} m")
    return EXIT_OK


def cmd_leader(args) -> int:
    started = time.perf_counter()
    cfg = _load_config(args)
    raw = load_scenario(args.config)[1] if args.config else {}
    lead = raw.get("leader", {})
    os.makedirs(args.out, exist_ok=True)
    result = leader_follower_scenario(
        cfg,
        follower_offset=tuple(lead.get("follower_offset", (-1.0, 0.0))),
        leader_speed=float(lead.get("leader_speed", 0.5)),
        gate_width=float(lead.get("gate_width", 0.8)))
    trace_path = os.path.join(args.out, "trace.csv")
    _write_csv(trace_path, ["t", "x_follower", "y_follower",
                            "x_leader", "y_leader"],
               [[f"{v:.4f}" for v in row] for row in result.trace],
               "leader-follower trace")
    summary_path = os.path.join(args.out, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write(f"gate_pass = {result.gate_pass}\n")
        fh.write(f"gate_x_m = {result.gate_x:.3f}\n")
        fh.write(f"gate_width_m = {result.gate_width:.3f}\n")
        fh.write(f"offset_error_mean_m = {result.offset_error_mean:.4f}\n")
    _write_manifest(args.out, args.config, cfg.seed,
                    [trace_path, summary_path], started)
    print(f"leader: gate_pass={result.gate_pass}, "
          f"offset error {result.offset_error_mean:.3f} m")
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relloc",
        description="Range-based relative localization: simulation studies")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="TOML scenario config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("converge", help="startup convergence study")
    common(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--assert", dest="check", action="store_true",
                   help="exit 2 unless the convergence criteria hold")
    p.add_argument("--mean-limit", type=float, default=20.0,
                   help="mean convergence-time limit for --assert, s")
    p.add_argument("--frac-limit", type=float, default=0.9,
                   help="fraction converged by 60 s required for --assert")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("observe", help="observability sweep")
    p.add_argument("--grid", required=True,
                   help="random:N[:SEED], formation-lock:N[:SEED], or "
                        "var=value / var=lo:hi:n list")
    p.add_argument("--out", default="out")
    p.add_argument("--det-threshold", type=float,
                   default=observability.DET_THRESHOLD)
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("formation", help="pattern-formation scenario")
    common(p)
    p.set_defaults(func=cmd_formation)

    p = sub.add_parser("leader", help="leader-follower gate scenario")
    common(p)
    p.set_defaults(func=cmd_leader)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # internal fault contract
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
