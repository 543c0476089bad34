"""Shared builders for the test suite."""

import random

from knotid import ObservationGraph, Schedule, TemporalEdge, schedule_from_pairs

# Five processes used by the hand-built scenario below.
A, B, C, D, E = 0, 1, 2, 3, 4


def knot_churn_schedule() -> Schedule:
    """Hand-built 13-round scenario exercising the full knot life cycle.

    A three-process cycle closes at round 4 (its closing receiver sees it
    immediately), a bystander observes it at round 5, an incoming link
    destroys it at round 6, a four-process cycle closes at round 7, and the
    remaining rounds relay until everyone has seen the larger knot. Process D
    is the first to assemble the four-process knot (round 9: knowledge of the
    round-7 link needs two hops because senders never learn their own
    outgoing links).
    """
    rounds = [
        [],            # 1
        [(D, C)],      # 2
        [(C, B)],      # 3
        [(B, D)],      # 4
        [(D, E)],      # 5
        [(A, B)],      # 6
        [(C, A)],      # 7
        [(A, B)],      # 8
        [(B, D)],      # 9
        [(D, E)],      # 10
        [(D, C)],      # 11
        [(C, B)],      # 12
        [(C, A)],      # 13
    ]
    return schedule_from_pairs(5, rounds, params="churn_demo")


def disjoint_two_cycles_schedule() -> Schedule:
    """Two 2-cycles with no cross links: primaries can never agree."""
    return schedule_from_pairs(
        4, [[(0, 1)], [(1, 0)], [(2, 3)], [(3, 2)]], params="disjoint_pair")


def random_digraph(rng: random.Random, n: int, p: float) -> ObservationGraph:
    """Erdos-Renyi style digraph with arbitrary stamps on the edges."""
    edges = []
    for src in range(n):
        for dst in range(n):
            if src != dst and rng.random() < p:
                edges.append(TemporalEdge(src, dst, rng.randrange(10)))
    return ObservationGraph.from_edges(edges, extra_nodes=range(n))
