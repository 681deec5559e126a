import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersim import (
    EventOrder,
    generate_run,
    infinite_path,
    meaningful_times,
    path_graph,
    replay,
)
from conftest import random_connected_env


def make_order(records, mode="async"):
    times = np.array([r[0] for r in records], dtype=np.float64)
    robots = np.array([r[1] for r in records], dtype=np.int64)
    kinds = np.array([r[2] if len(r) > 2 else 0 for r in records], dtype=np.int8)
    return EventOrder(
        times=times,
        robots=robots,
        kinds=kinds,
        horizon=float(times[-1]) if len(times) else 0.0,
        max_index=int(robots.max()) if len(robots) else 0,
        mode=mode,
    )


class TestMeaningfulTimes:
    def test_five_record_example(self):
        S = make_order([(0.3, 2), (0.5, 1), (0.7, 2), (0.9, 3), (1.1, 1)])
        mt = meaningful_times(S)
        assert list(mt.times) == [0.5, 0.7, 0.9, 1.1]
        assert list(mt.event_flags) == [0, 1, 1, 1, 1]

    def test_single_record(self):
        S = make_order([(0.2, 1)])
        assert list(meaningful_times(S).times) == [0.2]

    def test_high_index_before_first_is_not_meaningful(self):
        S = make_order([(0.1, 3), (0.2, 2), (0.3, 1), (0.4, 2)])
        mt = meaningful_times(S)
        assert list(mt.times) == [0.3, 0.4]

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=40))
    def test_matches_direct_definition(self, robots):
        times = np.cumsum(np.full(len(robots), 0.5))
        S = make_order(list(zip(times, robots)))
        mt = meaningful_times(S)
        # direct transcription of the definition
        expected = []
        m = 0
        for t, i in zip(times, robots):
            if i <= m + 1:
                expected.append(t)
                m += 1
        assert list(mt.times) == expected

    def test_config_changes_only_at_meaningful_times(self):
        # events of robots that cannot yet act change nothing anywhere
        S = make_order([(0.2, 5), (0.4, 2), (0.6, 1), (0.8, 2), (0.9, 4)])
        mt = meaningful_times(S)
        for env in (path_graph(3), infinite_path("prefilled")):
            rr = replay(S, env, log_changes=True)
            flagged = set(np.nonzero(mt.event_flags)[0])
            assert set(rr.changes.eidx).issubset(flagged)


class TestHandTraces:
    def test_p2_settle_then_delete_settled(self):
        """As-logged deletion removes even a settled robot in a replay."""
        S = make_order([(0.5, 1, 0), (0.9, 1, 1)])
        rr = replay(S, path_graph(2))
        assert rr.counters["settled"] == 0
        assert rr.counters["settled_deletions"] == 1
        assert rr.entered == 1
        assert rr.crashed == 1
        assert rr.makespan is None

    def test_p2_full_slow_trace(self):
        """Hand-computed eight-event trace ending with both vertices slow."""
        S = make_order(
            [
                (0.5, 1), (0.7, 2), (0.9, 2), (1.0, 3),
                (1.2, 3), (1.4, 4), (1.6, 3), (1.8, 4),
            ]
        )
        rr = replay(S, path_graph(2), log_changes=True)
        assert rr.makespan == 0.9
        assert rr.slow_makespan == 1.8
        assert rr.entered == 4
        assert rr.tree_edges == [(1, 2)]
        # A3 sits mobile at depth 2, A4 mobile at depth 1
        import dispersim.kernels as krn

        moves = [
            (int(rr.changes.robot[j]), int(rr.changes.value[j]))
            for j in range(len(rr.changes.eidx))
            if rr.changes.code[j] == krn.C_MOVE
        ]
        assert moves == [(3, 2)]

    def test_single_robot_b_crossing_trace(self):
        """A_1 starts at v_0 of B; its first activation crosses the edge."""
        S = make_order([(0.4, 1)])
        rb = replay(S, infinite_path("tasep-b"), deletion_rule="ignore-deletions")
        assert list(rb.crossing_times) == [0.4]
        rp = replay(S, infinite_path("prefilled"))
        assert rp.entered == 1

    def test_ignore_deletions_is_plain_activation(self):
        S = make_order([(0.4, 1, 1), (0.8, 1, 1)])
        rb = replay(S, infinite_path("tasep-b"), deletion_rule="ignore-deletions")
        assert list(rb.crossing_times) == [0.4]
        assert rb.crashed == 0


class TestGenerate:
    def test_path1_async_makespan_is_first_activation(self):
        S, res = generate_run(path_graph(1), c=0.0, seed=11)
        a1_events = S.times[S.robots == 1]
        assert res.makespan == a1_events[0]

    def test_path1_sync_makespan_one_step(self):
        _, res = generate_run(path_graph(1), c=0.0, seed=0, mode="sync")
        assert res.makespan == 1.0

    def test_determinism(self):
        for mode in ("async", "sync"):
            S1, r1 = generate_run(path_graph(15), c=0.25, adversary="random",
                                  seed=9, mode=mode)
            S2, r2 = generate_run(path_graph(15), c=0.25, adversary="random",
                                  seed=9, mode=mode)
            assert np.array_equal(S1.times, S2.times)
            assert np.array_equal(S1.robots, S2.robots)
            assert np.array_equal(S1.kinds, S2.kinds)
            assert r1.makespan == r2.makespan
            assert S1.to_text() == S2.to_text()

    def test_truncation_retry_is_transparent(self):
        S1, r1 = generate_run(path_graph(8), c=0.0, seed=3)
        S2, r2 = generate_run(path_graph(8), c=0.0, seed=3, K=2)
        assert np.array_equal(S1.times, S2.times)
        assert r1.makespan == r2.makespan

    def test_horizon_flags_partial(self):
        _, res = generate_run(path_graph(50), c=0.0, seed=1, horizon=5.0)
        assert not res.completed
        assert res.slow_makespan is None

    def test_mobile_robot_always_on_settled(self):
        for seed in range(4):
            env = random_connected_env(14, 8, 200 + seed)
            _, res = generate_run(env, c=0.4, adversary="random", seed=seed)
            assert res.counters["mobile_alone"] == 0
            assert res.counters["capacity_violations"] == 0

    def test_random_tiebreak_deterministic_per_seed(self):
        from conftest import random_connected_env

        env = random_connected_env(12, 10, 55)
        S1, r1 = generate_run(env, c=0.0, seed=2, tiebreak="random")
        S2, r2 = generate_run(env, c=0.0, seed=2, tiebreak="random")
        assert np.array_equal(S1.times, S2.times)
        assert r1.makespan == r2.makespan
        assert r1.counters["capacity_violations"] == 0

    def test_exponential_gaps_ks(self):
        """Per-robot inter-activation gaps against Exp(1), fixed seed corpus."""
        S, _ = generate_run(path_graph(10), c=0.0, seed=42, stop="horizon",
                            horizon=400.0)
        for robot in (1, 2, 3):
            ts = S.times[S.robots == robot]
            gaps = np.diff(ts)
            assert len(gaps) > 150
            stat = scipy.stats.kstest(gaps, "expon")
            assert stat.pvalue > 0.01, (robot, stat)


class TestReplay:
    def test_replay_reproduces_generative_run(self):
        for seed in range(5):
            env = random_connected_env(12, 5, 300 + seed)
            S, res = generate_run(env, c=0.3, adversary="random", seed=seed)
            rr = replay(S, env)
            assert rr.makespan == res.makespan
            assert rr.slow_makespan == res.slow_makespan
            assert rr.entered == res.entered
            assert rr.crashed == res.crashed
            assert rr.tree_edges == res.tree_edges
            assert rr.tree_roots == res.tree_roots

    def test_replay_idempotent(self):
        env = path_graph(10)
        S, _ = generate_run(env, c=0.25, adversary="random", seed=4)
        r1 = replay(S, env)
        r2 = replay(S, env)
        assert r1 == r2

    def test_sync_replay_reproduces(self):
        env = path_graph(12)
        S, res = generate_run(env, c=0.3, adversary="random", seed=6, mode="sync")
        rr = replay(S, env)
        assert rr.makespan == res.makespan
        assert rr.slow_makespan == res.slow_makespan
        assert rr.crashed == res.crashed

    def test_multisource_replay_reproduces(self):
        env = random_connected_env(14, 6, 77, sources=[2, 9])
        S, res = generate_run(env, c=0.0, seed=8)
        rr = replay(S, env)
        assert rr.makespan == res.makespan
        assert rr.tree_edges == res.tree_edges
        assert len(res.tree_roots) == 2

    def test_replay_rejects_unknown_rule(self):
        S = make_order([(0.1, 1)])
        with pytest.raises(ValueError):
            replay(S, path_graph(2), deletion_rule="sometimes")


class TestSerialization:
    def test_roundtrip_bit_exact(self):
        S, _ = generate_run(path_graph(9), c=0.35, adversary="random", seed=13)
        text = S.to_text()
        S2 = EventOrder.from_text(text)
        assert np.array_equal(S.times, S2.times)
        assert np.array_equal(S.robots, S2.robots)
        assert np.array_equal(S.kinds, S2.kinds)
        assert S2.mode == "async"
        assert S2.to_text() == text

    def test_sync_mode_inferred_from_integral_times(self):
        S, _ = generate_run(path_graph(4), c=0.0, seed=1, mode="sync")
        S2 = EventOrder.from_text(S.to_text())
        assert S2.mode == "sync"

    def test_file_roundtrip(self, tmp_path):
        S, _ = generate_run(path_graph(5), c=0.0, seed=2)
        p = tmp_path / "run.events"
        S.save(str(p))
        S2 = EventOrder.load(str(p))
        assert np.array_equal(S.times, S2.times)

    def test_record_format(self):
        S = make_order([(0.5, 1, 0), (0.9, 2, 1)])
        lines = S.to_text().splitlines()
        assert lines[0] == "0.5\t1\tA"
        assert lines[1] == "0.90000000000000002\t2\tAD"

    def test_validate_catches_disorder(self):
        S = make_order([(0.9, 1), (0.5, 2)])
        with pytest.raises(ValueError):
            S.validate()
