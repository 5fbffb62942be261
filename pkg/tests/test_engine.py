"""Simulation loop, replays and trace audits."""

import io
import json

import numpy as np
import pytest

from cmu_lab.core.accounting import regret
from cmu_lab.exceptions import SimulationError
from cmu_lab.services.costs import CostKind, CostModel
from cmu_lab.services.engine import (
    SimulationService,
    UniformStream,
    dump_trace,
    iter_slot_records,
    replay_pair,
    simulate,
)
from cmu_lab.services.generators import gen_uniform_band
from cmu_lab.services.policies import PolicyConfig, PolicyKind

ORACLE = PolicyConfig(kind=PolicyKind.ORACLE)
PREEMPTIVE = PolicyConfig(kind=PolicyKind.PREEMPTIVE)
NONPREEMPTIVE = PolicyConfig(kind=PolicyKind.NONPREEMPTIVE)
PTN = PolicyConfig(kind=PolicyKind.PREEMPT_THEN_NONPREEMPT)
PTN_GEO = PolicyConfig(kind=PolicyKind.PREEMPT_THEN_NONPREEMPT_GEO)
DETERMINISTIC_POLICIES = [ORACLE, PREEMPTIVE, NONPREEMPTIVE, PTN]


def _random_instance(make_instance, seed: int, n: int = 4, t_scale: int = 60):
    rng = np.random.default_rng(seed)
    return make_instance(
        rng.uniform(0, 1, n).tolist(), rng.choice([1.0, 2.0, 3.0], n).tolist(), t_scale
    )


class TestSimulate:
    def test_single_job(self, make_instance):
        trace = simulate(make_instance([0.5], t_scale=10), CostModel(), ORACLE, 0)
        assert trace.completion_slot == (10,)
        assert trace.served.tolist() == [0] * 10
        assert trace.total_slots == 10

    def test_oracle_follows_cmu_order(self, make_instance):
        trace = simulate(make_instance([0.9, 0.1]), CostModel(), ORACLE, 1)
        assert trace.completion_slot == (100, 200)
        assert trace.completion_order == (0, 1)

    @pytest.mark.parametrize("cfg", DETERMINISTIC_POLICIES, ids=lambda c: c.name)
    def test_trace_invariants(self, make_instance, cfg):
        inst = _random_instance(make_instance, 5)
        trace = simulate(inst, CostModel(), cfg, 42)
        served = trace.served
        assert trace.total_slots == inst.total_service == len(served)
        assert trace.served_counts().tolist() == list(inst.service)
        for job, slot in enumerate(trace.completion_slot):
            assert served[slot - 1] == job
            assert job not in served[slot:]
        assert sorted(trace.completion_order) == list(range(inst.n))
        assert sum(trace.preempt_service) <= trace.t_s
        assert regret(trace, inst).regret >= -1e-9

    @pytest.mark.parametrize("cfg", DETERMINISTIC_POLICIES, ids=lambda c: c.name)
    def test_fast_forward_matches_slot_by_slot(self, make_instance, cfg):
        inst = _random_instance(make_instance, 9, n=5)
        fast = simulate(inst, CostModel(), cfg, 3, record=True)
        slow = simulate(inst, CostModel(), cfg, 3, record=True, per_slot=True)
        assert fast == slow
        for a, b in zip(fast.samples, slow.samples):
            assert np.array_equal(a, b)

    @pytest.mark.parametrize("cfg", [NONPREEMPTIVE, PTN_GEO], ids=lambda c: c.name)
    def test_geometric_fast_forward_matches_slot_by_slot(self, make_instance, cfg):
        inst = make_instance(
            [0.9, 0.6, 0.3, 0.1], rates=[1, 2, 1, 3], t_scale=30, service="geo"
        )
        fast = simulate(inst, CostModel(), cfg, 5, record=True)
        slow = simulate(inst, CostModel(), cfg, 5, record=True, per_slot=True)
        assert fast == slow
        assert fast.expected_cost == slow.expected_cost
        for a, b in zip(fast.samples, slow.samples):
            assert np.array_equal(a, b)

    def test_deterministic_given_seed(self, make_instance):
        inst = _random_instance(make_instance, 2)
        model = CostModel(kind=CostKind.GAUSSIAN, sigma=0.7)
        assert simulate(inst, model, PTN, 8) == simulate(inst, model, PTN, 8)

    def test_samples_cover_presence(self, make_instance):
        inst = _random_instance(make_instance, 4)
        trace = simulate(inst, CostModel(), PTN, 0, record=True)
        assert [len(s) for s in trace.samples] == list(trace.completion_slot)

    def test_regret_nonnegative_on_random_instances(self, make_instance):
        for seed in range(20):
            inst = _random_instance(make_instance, 100 + seed, n=6, t_scale=12)
            for cfg in DETERMINISTIC_POLICIES:
                trace = simulate(inst, CostModel(), cfg, seed)
                assert regret(trace, inst).regret >= -1e-9

    def test_slot_cap(self, make_instance):
        with pytest.raises(SimulationError):
            inst = make_instance([0.5], t_scale=10)
            simulate(inst, CostModel(), ORACLE, 0, slot_cap=5)

    def test_geometric_mean_completion(self, make_instance):
        inst = make_instance([0.5], t_scale=100, service="geo")
        slots = [
            simulate(inst, CostModel(), ORACLE, seed).completion_slot[0]
            for seed in range(10_000)
        ]
        assert abs(np.mean(slots) - 100) < 3

    def test_deterministic_runs_carry_no_expected_cost(self, make_instance):
        trace = simulate(_random_instance(make_instance, 3), CostModel(), PTN, 0)
        assert trace.expected_cost is None

    def test_geometric_oracle_expected_cost_is_benchmark(self, make_instance):
        inst = make_instance(
            [0.8, 0.3, 0.6], rates=[1, 2, 40], t_scale=20, service="geo"
        )
        for seed in range(20):
            report = regret(simulate(inst, CostModel(), ORACLE, seed), inst)
            assert report.conditional_cost == pytest.approx(report.benchmark_cost)
            assert report.regret == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("cfg", [NONPREEMPTIVE, PTN_GEO], ids=lambda c: c.name)
    def test_expected_cost_tracks_realized_cost(self, make_instance, cfg):
        inst = make_instance(
            [0.9, 0.5, 0.2], rates=[1, 2, 1], t_scale=20, service="geo"
        )
        reports = [
            regret(simulate(inst, CostModel(), cfg, seed), inst) for seed in range(4000)
        ]
        realized = np.array([r.realized_cost for r in reports])
        expected = np.array([r.conditional_cost for r in reports])
        diff = realized - expected
        assert abs(diff.mean()) <= 4 * diff.std(ddof=1) / np.sqrt(len(diff))
        if cfg is NONPREEMPTIVE:
            assert expected.std() < realized.std()


class TestReplayPair:
    def test_same_config_gives_identical_traces(self, make_instance):
        inst = _random_instance(make_instance, 6)
        a, b = replay_pair(inst, CostModel(), PTN, PTN, 11)
        assert a == b

    def test_zero_preemption_equals_nonpreemptive(self, make_instance):
        inst = _random_instance(make_instance, 7, n=5)
        ptn0 = PolicyConfig(kind=PolicyKind.PREEMPT_THEN_NONPREEMPT, t_s=0)
        a, b = replay_pair(inst, CostModel(), ptn0, NONPREEMPTIVE, 12)
        assert a == b

    def test_full_preemption_equals_preemptive(self, make_instance):
        inst = _random_instance(make_instance, 8, n=5)
        ptn_all = PolicyConfig(
            kind=PolicyKind.PREEMPT_THEN_NONPREEMPT, t_s=inst.total_service
        )
        a, b = replay_pair(inst, CostModel(), ptn_all, PREEMPTIVE, 13)
        assert a.segments == b.segments
        assert a.completion_slot == b.completion_slot
        assert sum(a.preempt_service) == inst.total_service

    def test_oracle_beats_ptn_on_large_gap(self, make_instance):
        inst = make_instance([0.95, 0.05, 0.5], t_scale=500)
        a, b = replay_pair(inst, CostModel(), ORACLE, PTN, 14)
        assert regret(a, inst).regret == 0.0
        assert regret(b, inst).regret >= 0.0

    def test_geometric_service_lengths_shared_across_policies(self, make_instance):
        inst = make_instance([0.7, 0.4, 0.2], t_scale=40, service="geo")
        geo = PolicyConfig(kind=PolicyKind.PREEMPT_THEN_NONPREEMPT_GEO)
        a, b = replay_pair(inst, CostModel(), ORACLE, geo, 15)
        assert a.served_counts().tolist() == b.served_counts().tolist()


class TestUniformStream:
    def test_success_count_matches_single_draws(self):
        fast = UniformStream(np.random.default_rng(4), chunk=8)
        slow = UniformStream(np.random.default_rng(4), chunk=8)
        for _ in range(50):
            k = fast.slots_until_success(0.1)
            count = 1
            while slow.next() >= 0.1:
                count += 1
            assert k == count


class TestTraceDump:
    def test_records(self, make_instance):
        inst = make_instance([0.6, 0.3], t_scale=5)
        trace = simulate(inst, CostModel(), PTN, 0, record=True)
        records = list(iter_slot_records(trace))
        assert len(records) == trace.total_slots
        for rec in records:
            present = {i for i in range(2) if trace.completion_slot[i] >= rec.slot}
            assert set(rec.costs_observed) == present
            if rec.completed is not None:
                assert rec.served == rec.completed

    def test_ndjson(self, make_instance):
        inst = make_instance([0.6, 0.3], t_scale=5)
        trace = simulate(inst, CostModel(), PTN, 0, record=True)
        buf = io.StringIO()
        assert dump_trace(trace, buf) == 10
        lines = buf.getvalue().splitlines()
        first = json.loads(lines[0])
        assert first["slot"] == 1
        assert set(first["costs_observed"]) == {"0", "1"}
        assert json.loads(lines[-1])["completed"] is not None

    def test_dump_to_path(self, make_instance, tmp_path):
        inst = make_instance([0.6], t_scale=3)
        trace = simulate(inst, CostModel(), PTN, 0, record=True)
        path = tmp_path / "trace.ndjson"
        assert dump_trace(trace, path) == 3
        assert len(path.read_text().splitlines()) == 3

    def test_requires_recording(self, make_instance):
        trace = simulate(make_instance([0.6], t_scale=3), CostModel(), PTN, 0)
        with pytest.raises(SimulationError):
            list(iter_slot_records(trace))


class TestSimulationService:
    def test_uses_settings(self, monkeypatch, make_instance):
        monkeypatch.setenv("CMU_LAB_SIM_SLOT_CAP", "5")
        service = SimulationService()
        with pytest.raises(SimulationError):
            service.simulate(make_instance([0.5], t_scale=10), CostModel(), ORACLE, 0)

    def test_matches_function(self, make_instance):
        inst = gen_uniform_band(4, 50, 0.2, seed=1)
        service = SimulationService()
        assert service.simulate(inst, CostModel(), PTN, 5) == simulate(
            inst, CostModel(), PTN, 5
        )
