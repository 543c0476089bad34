import random

from knotid import (
    Knot,
    computation_graph,
    gen_backbone,
    gen_computation,
    longest_output_time,
    run,
    schedule_from_pairs,
    verify,
    worst_case_schedule,
)
from knotid.engine import (
    write_diagnostics_jsonl,
    write_round_metrics_csv,
    write_trace_csv,
)
from util import disjoint_two_cycles_schedule


class TestRun:
    def test_all_empty_schedule(self):
        s = schedule_from_pairs(3, [[], [], []])
        t = run(s)
        assert all(entry is None for entry in t.outputs.values())
        assert all(m.messages == 0 and m.payload_edges == 0
                   for m in t.round_metrics)
        assert longest_output_time(t) is None

    def test_churn_scenario_observation_order(self, churn_schedule):
        t = run(churn_schedule, check_invariants=True)
        small, big = Knot((1, 2, 3)), Knot((0, 1, 2, 3))
        assert t.outputs[4] == (small, 5)   # bystander sees the 3-knot
        assert t.outputs[3] == (small, 4)   # closing process saw it first
        first_big = {pid: next((r for k, r in t.observation_logs[pid] if k == big),
                               None)
                     for pid in range(5)}
        assert first_big[3] == 9
        assert all(first_big[pid] > 9 for pid in (0, 1, 2, 4))
        assert t.outputs[0] == (big, 13)

    def test_worst_case_eight(self):
        t = run(worst_case_schedule(8))
        assert longest_output_time(t) == 15

    def test_fast_and_reference_paths_agree_on_random_schedules(self):
        for seed in range(12):
            rng = random.Random(seed)
            n = rng.randint(3, 8)
            rounds = []
            for _ in range(rng.randint(5, 40)):
                pairs = set()
                for _ in range(rng.randint(0, 4)):
                    src = rng.randrange(n)
                    dst = rng.randrange(n)
                    if src != dst:
                        pairs.add((src, dst))
                rounds.append(sorted(pairs))
            s = schedule_from_pairs(n, rounds)
            run(s, check_invariants=True)  # raises on any divergence

    def test_outputs_are_sound_against_lg_at_output_round(self, churn_schedule):
        # drive the pure state machine by hand and check every decision is a
        # knot of that process's own graph at the moment it was made
        from knotid import ProcessState, find_knots, make_message, on_state
        states = {pid: ProcessState.fresh(pid) for pid in range(churn_schedule.n)}
        for round_index, state in enumerate(churn_schedule.states, start=1):
            messages = {e.src: make_message(states[e.src]) for e in state}
            by_dst = {}
            for e in state:
                by_dst.setdefault(e.dst, []).append(e)
            for dst, in_edges in by_dst.items():
                incoming = [(messages[e.src], e)
                            for e in sorted(in_edges, key=lambda e: e.src)]
                before = states[dst].output
                states[dst] = on_state(states[dst], incoming, round_index)
                after = states[dst].output
                if before is None and after is not None:
                    knot, decided_round = after
                    assert decided_round == round_index
                    assert knot in find_knots(states[dst].lg, 2)
        assert run(churn_schedule).outputs \
            == {pid: s.output for pid, s in states.items()}

    def test_output_rounds_coincide_with_incoming_links(self, churn_schedule):
        t = run(churn_schedule)
        for pid, entry in t.outputs.items():
            if entry is None:
                continue
            _, round_index = entry
            state = churn_schedule.states[round_index - 1]
            assert any(e.dst == pid for e in state)

    def test_replay_is_deterministic(self):
        b = gen_backbone(15, 4, 21)
        s = gen_computation(b, 3, 200, 21)
        assert run(s) == run(s)

    def test_metric_sanity_bound(self, churn_schedule):
        t = run(churn_schedule)
        for metric in t.round_metrics:
            bound = metric.messages * len(
                computation_graph(churn_schedule, metric.round - 1).edges)
            assert metric.payload_edges <= bound

    def test_message_counts_match_links(self, churn_schedule):
        t = run(churn_schedule)
        assert [m.messages for m in t.round_metrics] \
            == [len(state) for state in churn_schedule.states]


class TestVerify:
    def test_uniform_run_passes(self):
        t = run(worst_case_schedule(5))
        v = verify(t)
        assert v.agreement and v.termination
        assert v.knot == Knot(range(5))
        assert v.diagnostics == []

    def test_disjoint_cycles_fail_agreement(self):
        v = verify(run(disjoint_two_cycles_schedule()))
        assert not v.agreement
        assert not v.termination
        assert v.knot is None
        assert any("not globally observable" in d for d in v.diagnostics)

    def test_silent_process_fails_termination(self):
        # process 3 exists but never gets a link
        s = schedule_from_pairs(4, [[(0, 1)], [(1, 2)], [(2, 0)], [(0, 1)]])
        v = verify(run(s))
        assert not v.termination
        assert any("process 3 produced no output" in d for d in v.diagnostics)

    def test_same_round_tie_is_reported(self):
        # both completed 2-cycles reach process 0 in the same round, on
        # links leaving the cycles (a relay chain would wire one cycle into
        # the other and destroy it in the receiver's graph)
        s = schedule_from_pairs(
            5,
            [[(1, 2)], [(2, 1)], [(3, 4)], [(4, 3)],
             [(1, 0), (3, 0)]])
        t = run(s, check_invariants=True)
        assert t.outputs[0] == (Knot((1, 2)), 5)
        assert {k for k, _ in t.observation_logs[0]} \
            == {Knot((1, 2)), Knot((3, 4))}
        v = verify(t)
        assert any(d.startswith("primary tie at process 0") for d in v.diagnostics)


class TestTraceFiles:
    def test_trace_csv_contents(self, tmp_path, churn_schedule):
        t = run(churn_schedule)
        path = tmp_path / "trace.csv"
        write_trace_csv(t, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "process,output_round,knot_members"
        assert lines[4] == "3,4,1|2|3"
        assert lines[5] == "4,5,1|2|3"

    def test_absent_output_leaves_fields_empty(self, tmp_path):
        s = schedule_from_pairs(2, [[], []])
        path = tmp_path / "trace.csv"
        write_trace_csv(run(s), str(path))
        assert path.read_text().splitlines()[1] == "0,,"

    def test_metrics_csv_contents(self, tmp_path, churn_schedule):
        t = run(churn_schedule)
        path = tmp_path / "rounds.csv"
        write_round_metrics_csv(t, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "round,messages,payload_edges"
        assert lines[1] == "1,0,0"
        assert len(lines) == 1 + churn_schedule.horizon

    def test_diagnostics_jsonl(self, tmp_path):
        import json
        v = verify(run(disjoint_two_cycles_schedule()))
        path = tmp_path / "diag.jsonl"
        write_diagnostics_jsonl(v, str(path))
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(records) == len(v.diagnostics)
        assert all("diagnostic" in r for r in records)

    def test_writers_are_byte_identical_across_runs(self, tmp_path, churn_schedule):
        paths = []
        for tag in ("a", "b"):
            t = run(churn_schedule)
            path = tmp_path / f"{tag}.csv"
            write_trace_csv(t, str(path))
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()
