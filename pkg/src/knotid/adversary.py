"""Schedule generators and adversary-level oracles.

A schedule is a finite prefix of a computation: an ordered sequence of state
graphs. State indices (and hence edge stamps and output rounds) are 1-based,
so the first state of a schedule is round 1.

The stock generators cover the experimental setup (a backbone whose only
knot is a directed cycle, with a fixed number of backbone edges appearing
uniformly at random per round) and the deterministic worst case for the
protocol's causally-chained complexity bound.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence

from .engine import run
from .graph import (
    Knot,
    ObservationGraph,
    TemporalEdge,
    find_knots,
    parse_edge_lines,
)


@dataclass(frozen=True)
class Schedule:
    """A finite prefix of a computation plus its generation provenance.

    ``states[j]`` is the state graph of round j+1 and every edge in it is
    stamped j+1. Generated schedules are reproducible from (params, seed);
    hand-built or padded ones carry whatever provenance string they were
    given.
    """

    n: int
    states: tuple
    params: str = "manual"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("process count must be non-negative")
        states = tuple(frozenset(s) for s in self.states)
        object.__setattr__(self, "states", states)
        for j, state in enumerate(states):
            for e in state:
                if e.state != j + 1:
                    raise ValueError(
                        f"edge {e} stored in state {j + 1}: stamp mismatch")
                if e.src >= self.n or e.dst >= self.n:
                    raise ValueError(
                        f"edge {e} references a process outside 0..{self.n - 1}")
        if any(ch.isspace() for ch in self.params):
            raise ValueError("params string must not contain whitespace")

    @property
    def horizon(self) -> int:
        return len(self.states)


def schedule_from_pairs(n: int, rounds: Sequence, params: str = "manual",
                        seed: int = 0) -> Schedule:
    """Build a schedule from per-round lists of (src, dst) pairs, stamping
    each round with its 1-based index."""
    states = tuple(
        frozenset(TemporalEdge(src, dst, j + 1) for src, dst in pairs)
        for j, pairs in enumerate(rounds))
    return Schedule(n=n, states=states, params=params, seed=seed)


def save_schedule(s: Schedule, path: str) -> None:
    """Write a schedule as a header line plus ``src dst state`` edge lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"n={s.n} horizon={s.horizon} seed={s.seed} params={s.params}\n")
        for state in s.states:
            for e in sorted(state, key=lambda e: (e.src, e.dst)):
                fh.write(f"{e.src} {e.dst} {e.state}\n")


def load_schedule(path: str) -> Schedule:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = {}
        for token in header.split():
            if "=" not in token:
                raise ValueError(f"malformed schedule header: {header!r}")
            key, value = token.split("=", 1)
            fields[key] = value
        try:
            n = int(fields["n"])
            horizon = int(fields["horizon"])
            seed = int(fields["seed"])
            params = fields["params"]
        except KeyError as exc:
            raise ValueError(f"schedule header missing {exc}") from exc
        buckets: list = [[] for _ in range(horizon)]
        for e in parse_edge_lines(fh):
            if not 1 <= e.state <= horizon:
                raise ValueError(f"edge {e} stamped outside the horizon")
            buckets[e.state - 1].append(e)
    return Schedule(n=n, states=tuple(frozenset(b) for b in buckets),
                    params=params, seed=seed)


@dataclass(frozen=True)
class Backbone:
    """Static experiment topology: a directed cycle with tree-attached nodes.

    The cycle is the unique knot. Tree edges point away from the cycle
    (component toward new node): pointing inward would give the cycle an
    incoming arc and destroy the knot, and outward edges are what lets knot
    information eventually reach every node.
    """

    n: int
    cycle: tuple
    tree_edges: tuple
    seed: int = 0

    @property
    def edges(self) -> tuple:
        k = len(self.cycle)
        cycle_arcs = tuple((self.cycle[i], self.cycle[(i + 1) % k])
                           for i in range(k))
        return cycle_arcs + self.tree_edges

    def static_graph(self) -> ObservationGraph:
        return ObservationGraph.from_edges(
            TemporalEdge(src, dst, 0) for src, dst in self.edges)


def gen_backbone(n: int, cycle_size: int, rng_seed: int) -> Backbone:
    """Cycle over processes 0..cycle_size-1, remaining nodes attached one by
    one with a single outward edge from a uniformly chosen connected node."""
    if n < 2:
        raise ValueError("a backbone needs at least two processes")
    if not 2 <= cycle_size <= n:
        raise ValueError(f"cycle_size must be in 2..{n}, got {cycle_size}")
    rng = random.Random(rng_seed)
    cycle = tuple(range(cycle_size))
    tree = []
    for new in range(cycle_size, n):
        parent = rng.randrange(new)  # every id below `new` is already connected
        tree.append((parent, new))
    backbone = Backbone(n=n, cycle=cycle, tree_edges=tuple(tree), seed=rng_seed)
    if find_knots(backbone.static_graph(), 2) != [Knot(cycle)]:
        raise RuntimeError("generated backbone lost its unique-knot invariant")
    return backbone


def gen_computation(backbone: Backbone, edges_per_state: int, horizon: int,
                    rng_seed: int) -> Schedule:
    """Sample ``edges_per_state`` distinct backbone edges per round,
    independently and uniformly, for ``horizon`` rounds."""
    pool = backbone.edges
    if not 1 <= edges_per_state <= len(pool):
        raise ValueError(
            f"edges_per_state must be in 1..{len(pool)}, got {edges_per_state}")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    rng = random.Random(rng_seed)
    states = []
    for index in range(1, horizon + 1):
        picks = rng.sample(pool, edges_per_state)
        states.append(frozenset(TemporalEdge(src, dst, index)
                                for src, dst in picks))
    params = (f"backbone:k={len(backbone.cycle)},m={edges_per_state},"
              f"bseed={backbone.seed}")
    return Schedule(n=backbone.n, states=tuple(states), params=params,
                    seed=rng_seed)


def worst_case_schedule(n: int) -> Schedule:
    """Slowest possible single-knot run: 2n-1 rounds, one link each, all
    causally chained.

    Rounds 1..n lay an n-cycle link by link; the receiver of round n's link
    is the first process to hold the whole cycle. Rounds n+1..2n-1 walk the
    same chain again so that each remaining process learns the knot one
    round later, the last one exactly at round 2n-1.
    """
    if n < 2:
        raise ValueError("need at least two processes")
    states = []
    for i in range(n):
        states.append(frozenset({TemporalEdge(i, (i + 1) % n, i + 1)}))
    for j in range(n - 1):
        states.append(frozenset({TemporalEdge(j, j + 1, n + 1 + j)}))
    return Schedule(n=n, states=tuple(states), params=f"worst_case:n={n}",
                    seed=0)


def insert_noncomm_states(s: Schedule, positions: Iterable[int]) -> Schedule:
    """Insert empty (non-communicating) states and re-stamp what shifts.

    Each position is a 1-based state index of the original schedule; an empty
    state is inserted immediately before it (``horizon + 1`` appends at the
    end, and repeats insert several empties at the same spot). All later
    edges are re-stamped by their shift, which preserves every causality
    relation of the original schedule.
    """
    counts: Dict[int, int] = {}
    for pos in positions:
        if not 1 <= pos <= s.horizon + 1:
            raise ValueError(
                f"insert position {pos} outside 1..{s.horizon + 1}")
        counts[pos] = counts.get(pos, 0) + 1
    states: list = []
    for original in range(1, s.horizon + 1):
        states.extend([frozenset()] * counts.get(original, 0))
        new_index = len(states) + 1
        states.append(frozenset(
            TemporalEdge(e.src, e.dst, new_index)
            for e in s.states[original - 1]))
    states.extend([frozenset()] * counts.get(s.horizon + 1, 0))
    return Schedule(n=s.n, states=tuple(states), params=s.params, seed=s.seed)


@dataclass
class UniformityReport:
    """Outcome of the omniscient primary-uniformity check on one schedule."""

    uniform: bool
    per_process: dict          # pid -> (Knot, round) or None
    globally_observable: dict  # every logged knot -> seen by all processes?

    def to_jsonable(self) -> dict:
        per_process = {
            str(pid): (None if entry is None
                       else {"knot": list(entry[0].members), "round": entry[1]})
            for pid, entry in sorted(self.per_process.items())}
        observability = [
            {"knot": list(k.members), "globally_observable": flag}
            for k, flag in sorted(self.globally_observable.items(),
                                  key=lambda item: item[0].members)]
        return {"uniform": self.uniform, "per_process": per_process,
                "globally_observable": observability}


def check_primary_uniform(s: Schedule, min_knot_size: int = 2) -> UniformityReport:
    """Run the whole protocol as an omniscient oracle over one schedule.

    Uniform means every process decided within the horizon and all primary
    knots are the same set. Also reports, for every knot that showed up in
    any process's log, whether every process eventually saw it.
    """
    trace = run(s, min_knot_size=min_knot_size)
    per_process = dict(trace.outputs)
    primaries = [entry for entry in per_process.values() if entry is not None]
    uniform = (len(primaries) == s.n
               and len({knot for knot, _ in primaries}) <= 1)
    logged_knots = {k for log in trace.observation_logs.values()
                    for k, _ in log}
    globally_observable = {
        k: all(any(k == seen for seen, _ in trace.observation_logs[pid])
               for pid in range(s.n))
        for k in logged_knots}
    return UniformityReport(uniform=uniform, per_process=per_process,
                            globally_observable=globally_observable)
