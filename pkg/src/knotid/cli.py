"""Command line harness: generate, run, sweep, verify, replay.

Sweeps reproduce the experiment grid (cycle size x edges per round x seed)
and emit a single CSV with one row per cell plus one mean row per
(cycle_size, edges_per_round) group. Every CSV embeds the canonical config
in a comment header so rerunning the same command reproduces the same bytes.

Exit codes: 0 when the requested properties hold, 1 on a property violation,
2 on usage or config errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from random import Random
from typing import List, Optional, Sequence, Tuple

from .adversary import (
    Schedule,
    check_primary_uniform,
    gen_backbone,
    gen_computation,
    load_schedule,
    save_schedule,
    worst_case_schedule,
)
from .engine import (
    longest_output_time,
    run,
    verify,
    write_diagnostics_jsonl,
    write_round_metrics_csv,
    write_trace_csv,
)

WORKERS_ENV = "KNOTID_WORKERS"


class ConfigError(Exception):
    pass


def parse_int_list(text: str) -> Tuple[int, ...]:
    """Comma-separated ints where each item may be a start:stop[:step]
    range, stop inclusive. Example: "2,4:10:2" -> (2, 4, 6, 8, 10)."""
    values: List[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = item.split(":")
            if len(parts) not in (2, 3):
                raise ConfigError(f"bad range {item!r}, want start:stop[:step]")
            try:
                start, stop = int(parts[0]), int(parts[1])
                step = int(parts[2]) if len(parts) == 3 else 1
            except ValueError as exc:
                raise ConfigError(f"bad range {item!r}: {exc}") from exc
            if step <= 0 or stop < start:
                raise ConfigError(f"bad range {item!r}")
            values.extend(range(start, stop + 1, step))
        else:
            try:
                values.append(int(item))
            except ValueError as exc:
                raise ConfigError(f"bad integer {item!r}") from exc
    if not values:
        raise ConfigError(f"empty integer list {text!r}")
    return tuple(values)


@dataclass
class ExperimentConfig:
    """One sweep definition. Only data-affecting fields enter the canonical
    string; workers and output path never change the results."""

    n: int = 100
    cycle_sizes: Tuple[int, ...] = (10,)
    edges_per_round: Tuple[int, ...] = (5,)
    horizon: int = 6000
    num_seeds: int = 10
    base_seed: int = 0
    min_knot_size: int = 2
    workers: int = 1
    out: str = "sweep.csv"

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be at least 1")
        if self.min_knot_size < 2:
            raise ConfigError("min_knot_size must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for k in self.cycle_sizes:
            if not 2 <= k <= self.n:
                raise ConfigError(f"cycle size {k} outside 2..{self.n}")
        for m in self.edges_per_round:
            if not 1 <= m <= self.n:
                raise ConfigError(f"edges per round {m} outside 1..{self.n}")

    def canonical(self) -> str:
        items = {
            "base_seed": self.base_seed,
            "cycle_sizes": ",".join(str(k) for k in self.cycle_sizes),
            "edges_per_round": ",".join(str(m) for m in self.edges_per_round),
            "horizon": self.horizon,
            "min_knot_size": self.min_knot_size,
            "n": self.n,
            "num_seeds": self.num_seeds,
        }
        return " ".join(f"{key}={items[key]}" for key in sorted(items))


def read_config_file(path: str) -> dict:
    """key=value lines, '#' starts a comment."""
    raw: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, value = (part.strip() for part in line.split("=", 1))
                raw[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return raw


_INT_KEYS = {"n", "horizon", "num_seeds", "base_seed", "min_knot_size", "workers"}
_LIST_KEYS = {"cycle_sizes", "edges_per_round"}


def config_from_sources(file_values: dict, flag_values: dict) -> ExperimentConfig:
    """Build a config from a file, then let explicit flags override it."""
    cfg = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    for key, value in merged.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _LIST_KEYS and isinstance(value, str):
            value = parse_int_list(value)
        elif key in _INT_KEYS and isinstance(value, str):
            try:
                value = int(value)
            except ValueError as exc:
                raise ConfigError(f"bad integer for {key}: {value!r}") from exc
        cfg = replace(cfg, **{key: value})
    cfg.validate()
    return cfg


@dataclass
class CellResult:
    cycle_size: int
    edges_per_round: int
    seed: int
    longest: Optional[int]
    agreement: bool
    termination: bool
    knot_size: Optional[int]


@dataclass
class MeanRow:
    cycle_size: int
    edges_per_round: int
    mean: Optional[float]
    excluded: int


def _run_cell(task: tuple) -> CellResult:
    n, cycle_size, edges, horizon, min_knot_size, cell_seed = task
    rng = Random(cell_seed)
    backbone_seed = rng.getrandbits(64)
    computation_seed = rng.getrandbits(64)
    backbone = gen_backbone(n, cycle_size, backbone_seed)
    schedule = gen_computation(backbone, edges, horizon, computation_seed)
    trace = run(schedule, min_knot_size=min_knot_size)
    verdict = verify(trace)
    return CellResult(
        cycle_size=cycle_size,
        edges_per_round=edges,
        seed=cell_seed,
        longest=longest_output_time(trace),
        agreement=verdict.agreement,
        termination=verdict.termination,
        knot_size=len(verdict.knot) if verdict.knot is not None else None,
    )


def run_sweep(cfg: ExperimentConfig) -> Tuple[List[CellResult], List[MeanRow]]:
    """Execute every (cycle_size, edges_per_round, seed) cell.

    Cell seeds are base_seed + cell index, counted in CSV row order, so any
    cell can be reproduced in isolation. Workers only change wall time, never
    results or row order.
    """
    tasks = []
    index = 0
    for cycle_size in cfg.cycle_sizes:
        for edges in cfg.edges_per_round:
            for _ in range(cfg.num_seeds):
                tasks.append((cfg.n, cycle_size, edges, cfg.horizon,
                              cfg.min_knot_size, cfg.base_seed + index))
                index += 1
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(task) for task in tasks]

    means: List[MeanRow] = []
    position = 0
    for cycle_size in cfg.cycle_sizes:
        for edges in cfg.edges_per_round:
            group = cells[position:position + cfg.num_seeds]
            position += cfg.num_seeds
            included = [c.longest for c in group if c.longest is not None]
            means.append(MeanRow(
                cycle_size=cycle_size,
                edges_per_round=edges,
                mean=sum(included) / len(included) if included else None,
                excluded=len(group) - len(included),
            ))
    return cells, means


SWEEP_COLUMNS = ("cycle_size,edges_per_round,seed,longest_output_round,"
                 "mean_output_round,agreement,termination,knot_size,excluded")


def _bool_str(flag: bool) -> str:
    return "true" if flag else "false"


def write_sweep_csv(cfg: ExperimentConfig, cells: Sequence[CellResult],
                    means: Sequence[MeanRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config: {cfg.canonical()}\n")
        fh.write(SWEEP_COLUMNS + "\n")
        by_group: dict = {}
        for cell in cells:
            by_group.setdefault(
                (cell.cycle_size, cell.edges_per_round), []).append(cell)
        for mean_row in means:
            for cell in by_group[(mean_row.cycle_size, mean_row.edges_per_round)]:
                fh.write(",".join([
                    str(cell.cycle_size),
                    str(cell.edges_per_round),
                    str(cell.seed),
                    "" if cell.longest is None else str(cell.longest),
                    "",
                    _bool_str(cell.agreement),
                    _bool_str(cell.termination),
                    "" if cell.knot_size is None else str(cell.knot_size),
                    "1" if cell.longest is None else "0",
                ]) + "\n")
            fh.write(",".join([
                str(mean_row.cycle_size),
                str(mean_row.edges_per_round),
                "",
                "",
                "" if mean_row.mean is None else f"{mean_row.mean:.3f}",
                "",
                "",
                "",
                str(mean_row.excluded),
            ]) + "\n")


def _schedule_from_args(args: argparse.Namespace) -> Schedule:
    if getattr(args, "schedule", None):
        return load_schedule(args.schedule)
    if args.worst_case is not None:
        if args.worst_case < 2:
            raise ConfigError("--worst-case needs at least 2 processes")
        return worst_case_schedule(args.worst_case)
    if not 2 <= args.cycle_size <= args.n:
        raise ConfigError(f"cycle size {args.cycle_size} outside 2..{args.n}")
    rng = Random(args.seed)
    backbone = gen_backbone(args.n, args.cycle_size, rng.getrandbits(64))
    return gen_computation(backbone, args.edges_per_round, args.horizon,
                           rng.getrandbits(64))


def _add_generator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=100,
                        help="process count (default 100)")
    parser.add_argument("--cycle-size", type=int, default=10,
                        help="backbone cycle size (default 10)")
    parser.add_argument("--edges-per-round", type=int, default=5,
                        help="backbone edges appearing per round (default 5)")
    parser.add_argument("--horizon", type=int, default=6000,
                        help="number of rounds to generate (default 6000)")
    parser.add_argument("--seed", type=int, default=0,
                        help="generator seed (default 0)")
    parser.add_argument("--worst-case", type=int, metavar="N", default=None,
                        help="emit the deterministic 2N-1 round worst case "
                             "instead of a backbone computation")


def cmd_gen(args: argparse.Namespace) -> int:
    schedule = _schedule_from_args(args)
    save_schedule(schedule, args.out)
    print(f"wrote {args.out}: n={schedule.n} horizon={schedule.horizon}")
    return 0


def _execute(schedule: Schedule, min_knot_size: int, out_prefix: str) -> int:
    trace = run(schedule, min_knot_size=min_knot_size)
    verdict = verify(trace)
    write_trace_csv(trace, f"{out_prefix}_trace.csv")
    write_round_metrics_csv(trace, f"{out_prefix}_rounds.csv")
    write_diagnostics_jsonl(verdict, f"{out_prefix}_diagnostics.jsonl")
    longest = longest_output_time(trace)
    print(f"processes: {schedule.n}  rounds: {schedule.horizon}")
    print("longest output round: "
          + (str(longest) if longest is not None else "absent"))
    print(f"agreement: {_bool_str(verdict.agreement)}")
    print(f"termination: {_bool_str(verdict.termination)}")
    if verdict.knot is not None:
        print("knot: " + "|".join(str(m) for m in verdict.knot.members))
    print(f"diagnostics: {len(verdict.diagnostics)}")
    return 0 if verdict.agreement and verdict.termination else 1


def cmd_run(args: argparse.Namespace) -> int:
    schedule = _schedule_from_args(args)
    return _execute(schedule, args.min_knot_size, args.out)


def cmd_replay(args: argparse.Namespace) -> int:
    schedule = load_schedule(args.schedule)
    return _execute(schedule, args.min_knot_size, args.out)


def cmd_verify(args: argparse.Namespace) -> int:
    schedule = load_schedule(args.schedule)
    report = check_primary_uniform(schedule, min_knot_size=args.min_knot_size)
    print(f"uniform: {_bool_str(report.uniform)}")
    for pid in sorted(report.per_process):
        entry = report.per_process[pid]
        if entry is None:
            print(f"process {pid}: no primary knot within horizon")
        else:
            knot, round_index = entry
            members = "|".join(str(m) for m in knot.members)
            print(f"process {pid}: primary {members} at round {round_index}")
    for knot in sorted(report.globally_observable, key=lambda k: k.members):
        members = "|".join(str(m) for m in knot.members)
        flag = _bool_str(report.globally_observable[knot])
        print(f"knot {members}: globally observable {flag}")
    if args.json:
        with open(args.json, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report.to_jsonable(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report.uniform else 1


def _default_workers() -> Optional[str]:
    return os.environ.get(WORKERS_ENV)


def cmd_sweep(args: argparse.Namespace) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    flag_values = {
        "n": args.n,
        "cycle_sizes": args.cycle_sizes,
        "edges_per_round": args.edges_per_round,
        "horizon": args.horizon,
        "num_seeds": args.num_seeds,
        "base_seed": args.base_seed,
        "min_knot_size": args.min_knot_size,
        "workers": args.workers if args.workers is not None else _default_workers(),
        "out": args.out,
    }
    cfg = config_from_sources(file_values, flag_values)
    cells, means = run_sweep(cfg)
    write_sweep_csv(cfg, cells, means, cfg.out)
    violations = sum(1 for c in cells if not (c.agreement and c.termination))
    print(f"wrote {cfg.out}: {len(cells)} cells, {len(means)} mean rows, "
          f"{violations} property violations")
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knotid",
        description="Simulate knot identification over dynamic-network schedules.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a schedule file")
    _add_generator_flags(gen)
    gen.add_argument("--out", default="schedule.txt", help="output path")
    gen.set_defaults(func=cmd_gen)

    runp = sub.add_parser("run", help="run one schedule end to end")
    runp.add_argument("schedule", nargs="?", default=None,
                      help="schedule file (otherwise generate from flags)")
    _add_generator_flags(runp)
    runp.add_argument("--min-knot-size", type=int, default=2)
    runp.add_argument("--out", default="run",
                      help="output prefix for trace files (default 'run')")
    runp.set_defaults(func=cmd_run)

    replay = sub.add_parser("replay", help="re-run a saved schedule file")
    replay.add_argument("schedule")
    replay.add_argument("--min-knot-size", type=int, default=2)
    replay.add_argument("--out", default="replay", help="output prefix")
    replay.set_defaults(func=cmd_replay)

    verifyp = sub.add_parser(
        "verify", help="report primary uniformity of a schedule file")
    verifyp.add_argument("schedule")
    verifyp.add_argument("--min-knot-size", type=int, default=2)
    verifyp.add_argument("--json", default=None,
                         help="also write a JSON report to this path")
    verifyp.set_defaults(func=cmd_verify)

    sweep = sub.add_parser("sweep", help="run a parameter sweep to CSV")
    sweep.add_argument("--config", default=None,
                       help="key=value config file; flags override it")
    sweep.add_argument("--n", type=int, default=None)
    sweep.add_argument("--cycle-sizes", dest="cycle_sizes", default=None,
                       help="comma list and/or start:stop[:step] ranges")
    sweep.add_argument("--edges-per-round", dest="edges_per_round", default=None,
                       help="comma list of edges appearing per round")
    sweep.add_argument("--horizon", type=int, default=None)
    sweep.add_argument("--num-seeds", type=int, default=None)
    sweep.add_argument("--base-seed", type=int, default=None)
    sweep.add_argument("--min-knot-size", type=int, default=None)
    sweep.add_argument("--workers", type=int, default=None,
                       help=f"parallel cells (default ${WORKERS_ENV} or 1)")
    sweep.add_argument("--out", default=None, help="CSV path")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(sys.argv[1:] if argv is None else list(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
