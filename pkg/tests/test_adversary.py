import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersim import adversary, generate_run, path_graph
from dispersim.errors import ScriptBudgetViolationError


class TestBudget:
    def test_zero_density(self):
        assert adversary.budget(0.0, 1e6, 4) == 0

    def test_quarter_at_100(self):
        assert adversary.budget(0.25, 100.0, 4) == 6

    def test_fig1_scale(self):
        assert adversary.budget(0.8, 613.0, 4) == 122

    def test_sync_divisor(self):
        assert adversary.budget(0.5, 100.0, 2) == 25

    def test_rejects_bad_c(self):
        with pytest.raises(ValueError):
            adversary.budget(1.0, 10.0, 4)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(0, 0.99), st.floats(0, 1e5), st.floats(0, 1e5)
    )
    def test_monotone_in_time(self, c, t1, t2):
        lo, hi = sorted((t1, t2))
        assert adversary.budget(c, lo, 4) <= adversary.budget(c, hi, 4)


class TestDecideCrash:
    def test_none_never(self):
        pol = adversary.make_policy("none", 0.5, "async")
        assert not adversary.decide_crash(pol, 1, 1000.0, 0)

    def test_budget_gates_everything(self):
        pol = adversary.make_policy("eager", 0.5, "async")
        assert not adversary.decide_crash(pol, 1, 7.0, 0)  # budget floor(0.875)=0
        assert adversary.decide_crash(pol, 1, 8.0, 0)
        assert not adversary.decide_crash(pol, 1, 8.0, 1)

    def test_random_uses_uniform(self):
        pol = adversary.make_policy("random", 0.5, "async", p=0.3)
        assert adversary.decide_crash(pol, 1, 100.0, 0, u=0.1)
        assert not adversary.decide_crash(pol, 1, 100.0, 0, u=0.9)

    def test_scripted_window_and_robot(self):
        pol = adversary.make_policy(
            "scripted", 0.5, "async", script=[(10.0, 20.0, 3)]
        )
        assert adversary.decide_crash(pol, 3, 15.0, 0)
        assert not adversary.decide_crash(pol, 2, 15.0, 0)
        assert not adversary.decide_crash(pol, 3, 25.0, 0)

    def test_script_budget_rejected_at_load(self):
        # two crashes by t=10 needs budget >= 2, but floor(0.5*10/4) = 1
        with pytest.raises(ScriptBudgetViolationError):
            adversary.make_policy(
                "scripted", 0.5, "async", script=[(0.0, 10.0, 1), (0.0, 10.0, 2)]
            )

    def test_script_file_roundtrip(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(
            json.dumps([{"t_min": 5.0, "t_max": 9.0, "robot_index": 2}])
        )
        entries = adversary.load_script_file(str(path))
        assert entries == [(5.0, 9.0, 2)]


class TestGeneratedRuns:
    def test_none_policy_no_crashes(self):
        _, res = generate_run(path_graph(20), c=0.5, adversary="none", seed=1)
        assert res.crashed == 0
        assert res.crash_fraction == 0.0

    def test_random_policy_crashes_with_budget(self):
        _, res = generate_run(path_graph(30), c=0.5, adversary="random", seed=1)
        assert res.crashed > 0
        assert 0.0 < res.crash_fraction < 1.0

    def test_budget_safety_on_event_orders(self):
        for seed in range(5):
            for c, kind in ((0.25, "random"), (0.6, "eager")):
                S, _ = generate_run(path_graph(15), c=c, adversary=kind, seed=seed)
                deletions = np.nonzero(S.kinds == 1)[0]
                for j, e in enumerate(deletions, start=1):
                    assert j <= adversary.budget(c, float(S.times[e]), 4)

    def test_eager_spends_budget(self):
        S, res = generate_run(path_graph(30), c=0.5, adversary="eager", seed=3)
        # greedy policy keeps pace with the accruing budget
        end = float(S.times[-1])
        assert res.crashed >= adversary.budget(0.5, end, 4) - 1

    def test_scripted_crash_hits_target(self):
        # robot 5's first movement attempt past t=8 (budget 1) gets the crash
        pol = adversary.make_policy(
            "scripted", 0.5, "async", script=[(8.0, 300.0, 5)]
        )
        S, res = generate_run(path_graph(10), c=0.5, adversary=pol, seed=2)
        deletions = np.nonzero(S.kinds == 1)[0]
        assert len(deletions) == 1
        assert S.robots[deletions[0]] == 5
        assert res.crashed == 1

    def test_settled_never_deleted(self):
        from dispersim import replay

        for seed in range(4):
            S, _ = generate_run(path_graph(12), c=0.7, adversary="random", seed=seed)
            rr = replay(S, path_graph(12))
            assert rr.counters["settled_deletions"] == 0
            assert rr.counters["non_attempt_deletions"] == 0
