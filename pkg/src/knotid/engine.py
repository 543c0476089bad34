"""Round-driven scheduler, trace collection, and the property verifier.

One round executes one state graph: every process with outgoing links sends
its pre-round observation-graph snapshot down each of them, every process
with incoming links merges what arrived (payloads plus the links
themselves), then checks its graph for knots. All sends of a round are
derived from end-of-previous-round state, so receive order within a round
cannot matter and the whole run is deterministic.

The hot loop does not rebuild graph values. Each process keeps its
observation set as a deduplicated append-only journal, and each receiver
remembers how much of every sender's journal it has already merged, so one
(sender, receiver) pair pays for each edge at most once over the whole run
instead of re-scanning near-identical sets every round. Knot detection runs
only when the receiver's projected arc set actually grew, which is the only
thing that can change the knot set. ``check_invariants=True`` runs the plain
``protocol.on_state`` state machine alongside and asserts both agree round
by round (and that every local graph stays inside the computation graph);
use it for small schedules.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

from .graph import Knot, TemporalEdge, knots_from_adjacency
from .protocol import ProcessState, make_message, on_state, primary_tie_break


class RoundMetric(NamedTuple):
    round: int
    messages: int
    payload_edges: int


@dataclass
class Trace:
    """Everything observable about one run.

    Outputs and observation logs are keyed by process id; ``outputs[p]`` is
    (knot, round) or None when p never decided within the horizon.
    """

    n: int
    horizon: int
    seed: int
    params: str
    outputs: dict
    observation_logs: dict
    round_metrics: list


@dataclass
class Verdict:
    """Did a trace satisfy agreement and termination, and if not, why not."""

    agreement: bool
    termination: bool
    knot: Optional[Knot]
    diagnostics: list = field(default_factory=list)


class _Proc:
    """Mutable per-process accumulator used by the fast engine loop."""

    __slots__ = ("pid", "journal", "edge_set", "adjacency", "nodes",
                 "merged_upto", "log", "logged", "output")

    def __init__(self, pid: int) -> None:
        self.pid = pid
        self.journal: list = []      # deduplicated, append-only merge order
        self.edge_set: set = set()
        self.adjacency: dict = {}    # projected static arcs
        self.nodes: set = {pid}
        self.merged_upto: dict = {}  # sender pid -> journal prefix consumed
        self.log: list = []          # (Knot, round)
        self.logged: set = set()
        self.output = None

    def absorb(self, edge: TemporalEdge) -> bool:
        """Add one temporal edge; True when the projected arc set grew."""
        if edge in self.edge_set:
            return False
        self.edge_set.add(edge)
        self.journal.append(edge)
        self.nodes.add(edge.src)
        self.nodes.add(edge.dst)
        outs = self.adjacency.setdefault(edge.src, set())
        if edge.dst in outs:
            return False
        outs.add(edge.dst)
        return True


def run(schedule, min_knot_size: int = 2, check_invariants: bool = False) -> Trace:
    """Execute a schedule against one process state machine per process."""
    n = schedule.n
    procs = [_Proc(pid) for pid in range(n)]
    metrics: List[RoundMetric] = []
    checker = _ReferenceChecker(n, min_knot_size) if check_invariants else None

    for round_index, state in enumerate(schedule.states, start=1):
        edges = sorted(state, key=lambda e: (e.dst, e.src))
        snapshot_len = {}
        for e in edges:
            if e.src not in snapshot_len:
                snapshot_len[e.src] = len(procs[e.src].journal)
        payload_edges = sum(snapshot_len[e.src] for e in edges)

        by_dst: Dict[int, list] = {}
        for e in edges:
            by_dst.setdefault(e.dst, []).append(e)

        for dst in sorted(by_dst):
            proc = procs[dst]
            grew = False
            for e in by_dst[dst]:
                sender = procs[e.src]
                start = proc.merged_upto.get(e.src, 0)
                stop = snapshot_len[e.src]
                if stop > start:
                    journal = sender.journal
                    for i in range(start, stop):
                        grew |= proc.absorb(journal[i])
                    proc.merged_upto[e.src] = stop
                grew |= proc.absorb(e)
            if grew:
                found = knots_from_adjacency(sorted(proc.nodes),
                                             proc.adjacency, min_knot_size)
                fresh = [k for k in found if k not in proc.logged]
                if fresh:
                    for k in fresh:
                        proc.logged.add(k)
                        proc.log.append((k, round_index))
                    if proc.output is None:
                        proc.output = (primary_tie_break(fresh), round_index)

        metrics.append(RoundMetric(round_index, len(edges), payload_edges))
        if checker is not None:
            checker.after_round(round_index, state, procs)

    return Trace(
        n=n,
        horizon=schedule.horizon,
        seed=schedule.seed,
        params=schedule.params,
        outputs={p.pid: p.output for p in procs},
        observation_logs={p.pid: tuple(p.log) for p in procs},
        round_metrics=metrics,
    )


class _ReferenceChecker:
    """Runs the plain per-process state machine in lockstep with the fast
    loop and asserts they never diverge. Quadratic in graph size; meant for
    small schedules under test."""

    def __init__(self, n: int, min_knot_size: int) -> None:
        self.min_knot_size = min_knot_size
        self.states = {pid: ProcessState.fresh(pid) for pid in range(n)}
        self.union_edges: set = set()
        self.union_nodes: set = set()

    def after_round(self, round_index: int, state, procs) -> None:
        messages = {e.src: make_message(self.states[e.src]) for e in state}
        by_dst: Dict[int, list] = {}
        for e in state:
            by_dst.setdefault(e.dst, []).append(e)
        for dst, in_edges in by_dst.items():
            incoming = [(messages[e.src], e)
                        for e in sorted(in_edges, key=lambda e: e.src)]
            self.states[dst] = on_state(self.states[dst], incoming,
                                        round_index, self.min_knot_size)
        for e in state:
            self.union_edges.add(e)
            self.union_nodes.add(e.src)
            self.union_nodes.add(e.dst)

        for pid, ref in self.states.items():
            fast = procs[pid]
            if ref.lg.edges != fast.edge_set:
                raise AssertionError(
                    f"round {round_index}: process {pid} graphs diverged")
            if tuple(fast.log) != ref.observation_log:
                raise AssertionError(
                    f"round {round_index}: process {pid} logs diverged")
            if fast.output != ref.output:
                raise AssertionError(
                    f"round {round_index}: process {pid} outputs diverged")
            if not ref.lg.edges <= self.union_edges:
                raise AssertionError(
                    f"round {round_index}: process {pid} observed edges "
                    "outside the computation graph")
            if not (ref.lg.nodes - {pid}) <= self.union_nodes:
                raise AssertionError(
                    f"round {round_index}: process {pid} observed nodes "
                    "outside the computation graph")


def longest_output_time(t: Trace) -> Optional[int]:
    """Largest output round across processes, None while anyone is missing."""
    rounds = []
    for pid in range(t.n):
        entry = t.outputs.get(pid)
        if entry is None:
            return None
        rounds.append(entry[1])
    return max(rounds) if rounds else None


def _fmt_knot(k: Knot) -> str:
    return "|".join(str(m) for m in k.members)


def verify(t: Trace) -> Verdict:
    """Check agreement (all outputs are the same set) and termination
    (everyone produced an output), with diagnostics for primary ties,
    missing outputs, and output knots not seen by every process."""
    present = [(pid, entry) for pid, entry in sorted(t.outputs.items())
               if entry is not None]
    distinct = {knot for _, (knot, _) in present}
    agreement = len(distinct) <= 1
    termination = len(present) == t.n
    knot = next(iter(distinct)) if agreement and distinct else None

    diagnostics: List[str] = []
    for pid, (out_knot, out_round) in present:
        first_observed = sum(1 for _, r in t.observation_logs[pid]
                             if r == out_round)
        if first_observed > 1:
            diagnostics.append(
                f"primary tie at process {pid}: {first_observed} knots first "
                f"observed together in round {out_round}")
    for out_knot in sorted(distinct, key=lambda k: k.members):
        unseen = [pid for pid in range(t.n)
                  if all(k != out_knot for k, _ in t.observation_logs[pid])]
        if unseen:
            diagnostics.append(
                f"output knot {_fmt_knot(out_knot)} is not globally "
                f"observable: never seen by processes {unseen}")
    for pid in range(t.n):
        if t.outputs.get(pid) is None:
            diagnostics.append(
                f"process {pid} produced no output within the horizon")
    return Verdict(agreement=agreement, termination=termination, knot=knot,
                   diagnostics=diagnostics)


def write_trace_csv(t: Trace, path: str) -> None:
    """Per-process outputs: ``process,output_round,knot_members``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["process", "output_round", "knot_members"])
        for pid in range(t.n):
            entry = t.outputs.get(pid)
            if entry is None:
                writer.writerow([pid, "", ""])
            else:
                knot, round_index = entry
                writer.writerow([pid, round_index, _fmt_knot(knot)])


def write_round_metrics_csv(t: Trace, path: str) -> None:
    """Per-round traffic: ``round,messages,payload_edges``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "messages", "payload_edges"])
        for metric in t.round_metrics:
            writer.writerow([metric.round, metric.messages,
                             metric.payload_edges])


def write_diagnostics_jsonl(verdict: Verdict, path: str) -> None:
    """One JSON record per diagnostic string."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in verdict.diagnostics:
            fh.write(json.dumps({"diagnostic": line}) + "\n")
