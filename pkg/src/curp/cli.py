"""Command line: ``curp gen | solve | sweep | playback``.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
Outputs are pure functions of inputs, flags and seed; wall-clock times are
only written with ``--timing`` (they are the one non-reproducible field).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import scenario_file, sim, throughput
from .model import validate_scenario
from .partition import DEFAULT_BETA
from .solvers import SOLVERS, run_solver

SEED_ENV = "CURP_SEED"
AXES = {"users": "users", "budget": "budget", "arrival": "arrival_rate", "noctrl": None}


class CliError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer", 2) from None


def load_config(path) -> sim.SimConfig:
    if path is None:
        return sim.SimConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise CliError(f"{path}: line 1: config must be a JSON object")
    try:
        return sim.SimConfig.from_dict(d)
    except (sim.ConfigError, TypeError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _config_from_args(args) -> sim.SimConfig:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else _default_seed()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if getattr(args, "mobility", None):
        cfg = replace(cfg, mobility=args.mobility)
    try:
        return cfg.check(strict=getattr(args, "strict", False))
    except sim.ConfigError as exc:
        raise CliError(str(exc)) from None


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _config_from_args(args)
    sc = sim.gen_scenario(cfg)
    text = scenario_file.dumps(sc)
    _write(args.out, text)
    print(scenario_file.digest_text(text), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def result_payload(result, timing: bool) -> dict:
    d = {
        "system_utility": result.system_utility,
        "total_cost": result.total_cost,
        "per_user_cost": list(result.per_user_cost),
        "fairness_mad": result.fairness_mad,
        "info": result.info,
        "schedules": [
            {
                "user": s.user,
                "origin": s.origin,
                "segments": [[g.region, g.arrive, g.depart, g.served] for g in s.segments],
            }
            for s in result.schedules
        ],
    }
    if timing:
        d["wall_time"] = result.wall_time
    return d


def _solver_params(args) -> dict:
    return {"beta": args.beta, "step": args.c0, "dispatch": args.dispatch,
            "budget_split": args.budget_split}


def cmd_solve(args) -> int:
    try:
        sc = scenario_file.load(args.scenario)
    except (OSError, scenario_file.ScenarioFormatError, ValueError) as exc:
        raise CliError(f"cannot load scenario: {exc}") from None
    problems = validate_scenario(sc)
    if problems:
        raise CliError("invalid scenario:\n" + "\n".join(f"  {p}" for p in problems))
    params = _solver_params(args)
    result = run_solver(args.solver, sc, **params)
    report = {
        "scenario_digest": scenario_file.digest(sc),
        "solver": args.solver,
        "params": params,
        "result": result_payload(result, args.timing),
    }
    _write(args.out, _dump_json(report))
    if args.out not in (None, "-"):
        print(f"{args.solver}: utility={result.system_utility} cost={result.total_cost} "
              f"mad={result.fairness_mad:.3f}")
    return 0


def _axis_values(args):
    if args.step <= 0:
        raise CliError("--step must be positive", 2)
    if args.to < args.start:
        raise CliError("--to must be >= --from", 2)
    vals = []
    k = 0
    while True:
        v = round(args.start + k * args.step, 10)
        if v > args.to + 1e-12:
            break
        vals.append(v)
        k += 1
    if args.axis != "arrival":
        vals = sorted({int(round(v)) for v in vals})
    return vals


def _parse_seeds(text):
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def sweep_cell(task):
    """One (x, seed) cell of a sweep; returns rows sorted by solver name."""
    axis, x, seed, cfg, solvers, params, timing = task
    rows = []
    if axis == "noctrl":
        cfg = replace(cfg, seed=seed)
        world = sim.gen_world(cfg)
        traces = sim.gen_traces(cfg, int(x))
        util = sim.eval_no_control(traces, world.requests)
        rows.append({"x": x, "solver": "no-control", "seed": seed, "utility": util,
                     "total_cost": 0, "mad": 0.0, "requests": len(world.requests),
                     "demand": sum(r.length for r in world.requests)})
        return rows
    cfg = replace(cfg, seed=seed, **{AXES[axis]: x})
    sc = sim.gen_scenario(cfg)
    for name in solvers:
        res = run_solver(name, sc, **params)
        row = {"x": x, "solver": name, "seed": seed, "utility": res.system_utility,
               "total_cost": res.total_cost, "mad": res.fairness_mad,
               "requests": len(sc.requests), "demand": sum(r.length for r in sc.requests)}
        if timing:
            row["wall_time"] = res.wall_time
        rows.append(row)
    return rows


def _rows_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([f"{r[c]:.6f}" if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if args.axis != "noctrl":
        if not solvers:
            raise CliError("--solvers must name at least one solver", 2)
        unknown = [s for s in solvers if s not in SOLVERS]
        if unknown:
            raise CliError(f"unknown solver(s): {', '.join(unknown)}", 2)
    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise CliError("--seeds must list at least one seed", 2)
    cfg = _config_from_args(args)
    xs = _axis_values(args)
    params = _solver_params(args)
    tasks = [(args.axis, x, seed, cfg, solvers, params, args.timing) for x in xs for seed in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(sweep_cell, tasks))
    else:
        chunks = [sweep_cell(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["x"], r["solver"], r["seed"]))
    cols = ["x", "solver", "seed", "utility", "total_cost", "mad", "requests", "demand"]
    if args.timing and args.axis != "noctrl":
        cols.append("wall_time")
    os.makedirs(args.out_dir, exist_ok=True)
    _write(os.path.join(args.out_dir, "sweep.csv"), _rows_csv(rows, cols))

    plot = []
    keys = sorted({(r["x"], r["solver"]) for r in rows})
    for x, name in keys:
        group = [r for r in rows if r["x"] == x and r["solver"] == name]
        n = len(group)
        entry = {"x": x, "solver": name, "seeds": n,
                 "utility": sum(r["utility"] for r in group) / n,
                 "mad": sum(r["mad"] for r in group) / n,
                 "satisfaction": sum(r["utility"] for r in group) / max(1, sum(r["demand"] for r in group))}
        if "wall_time" in cols:
            entry["wall_time"] = sum(r["wall_time"] for r in group) / n
        plot.append(entry)
    pcols = ["x", "solver", "seeds", "utility", "mad", "satisfaction"] + (["wall_time"] if "wall_time" in cols else [])
    _write(os.path.join(args.out_dir, f"plot_{args.axis}.csv"), _rows_csv(plot, pcols))
    meta = {"axis": args.axis, "values": xs, "solvers": solvers, "seeds": seeds,
            "config": cfg.to_dict(), "params": params}
    _write(os.path.join(args.out_dir, "sweep.json"), _dump_json(meta))
    print(f"{len(rows)} rows -> {args.out_dir}")
    return 0


def cmd_playback(args) -> int:
    rep = throughput.scene_report(args.dir)
    sys.stdout.write(rep.as_text())
    if args.out:
        _write(args.out, rep.as_csv())
    return 1 if rep.errors and not rep.rows else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a scenario file")
    g.add_argument("--config", help="JSON simulation config (keys of SimConfig)")
    g.add_argument("--seed", type=int, help=f"overrides config seed (default ${SEED_ENV})")
    g.add_argument("--mobility", choices=sim.MOBILITY_MODELS)
    g.add_argument("--strict", action="store_true", help="reject arrival rates outside [0.01, 0.1]")
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)

    def solver_flags(q):
        q.add_argument("--beta", type=float, default=DEFAULT_BETA, help="connectivity weight in similarity")
        q.add_argument("--c0", type=int, default=None, help="greedy allocation max step (default max(1, C//4))")
        q.add_argument("--dispatch", choices=("matching", "nearest"), default="matching")
        q.add_argument("--budget-split", choices=("shared", "even"), default="shared",
                       help="baseline budget rule for sequential/greedy")
        q.add_argument("--timing", action="store_true", help="include wall-clock times (not reproducible)")

    s = sub.add_parser("solve", help="run a solver on a scenario file")
    s.add_argument("--scenario", required=True)
    s.add_argument("--solver", required=True, choices=sorted(SOLVERS))
    s.add_argument("--out", default="-")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="sweep one experiment axis")
    w.add_argument("--axis", required=True, choices=sorted(AXES))
    w.add_argument("--from", dest="start", type=float, required=True)
    w.add_argument("--to", type=float, required=True)
    w.add_argument("--step", type=float, default=1.0)
    w.add_argument("--solvers", default="gpa-bnb", help="comma-separated solver names")
    w.add_argument("--seeds", default="0", help="e.g. 0,1,2 or 0-9")
    w.add_argument("--config")
    w.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    w.add_argument("--mobility", choices=sim.MOBILITY_MODELS)
    w.add_argument("--out-dir", required=True)
    w.add_argument("--jobs", type=int, default=1)
    solver_flags(w)
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("playback", help="fluent-playback table from a directory of throughput traces")
    b.add_argument("--dir", required=True)
    b.add_argument("--out", help="also write the table as CSV")
    b.set_defaults(func=cmd_playback)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"curp {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
