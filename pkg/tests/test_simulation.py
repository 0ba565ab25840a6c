"""Simulator: capacity, conservation, injectors, determinism, presets."""

from __future__ import annotations

import dataclasses

import pytest

from stormctl.agents import AgentConfig, Policy, ThresholdDb, TriggerCause
from stormctl.metrics import Verdict
from stormctl.simulation import (
    Injector,
    NormalBroadcastProfile,
    Scenario,
    ScenarioError,
    preset,
    run,
    saturation_cap,
    scenario_presets,
)

from .oracles import ipid_loop_bruteforce, loop_expected_counts


def loop_only_scenario(factor=2, n_ticks=12, cap_rate=10e6):
    """A bare loop chain: no generator, no agents, one pass per tick."""
    return Scenario(
        name="bare-loop", node_count=2, link_rate=cap_rate, tick=1.0,
        duration=float(n_ticks), seed=0,
        injectors=(Injector(kind="loop", start_t=2.0, origin_node=0,
                            pass_interval=1.0, factor=factor,
                            reuse_ipid=True),),
    )


class TestCapacity:
    def test_known_rates(self):
        assert saturation_cap(10e6, 1.0, 512) == 2
        assert saturation_cap(1e9, 1.0, 512) == 238
        assert saturation_cap(100e6, 250.0, 512) == 5963

    def test_gap_charged_per_frame(self):
        # 96 bit-times equal 12 byte-times of payload budget
        without_gap = int(1e9 * 1e-3 / (8 * 512))
        assert saturation_cap(1e9, 1.0, 512) < without_gap

    def test_rejects_nonpositive_inputs(self):
        with pytest.raises(ScenarioError):
            saturation_cap(0, 1.0, 512)


class TestScenarioValidation:
    def test_needs_two_nodes(self):
        with pytest.raises(ScenarioError):
            Scenario(node_count=1, duration=10.0)

    def test_duration_covers_a_tick(self):
        with pytest.raises(ScenarioError):
            Scenario(duration=0.5, tick=1.0)

    def test_injector_origin_must_exist(self):
        with pytest.raises(ScenarioError):
            Scenario(node_count=2, duration=10.0,
                     injectors=(Injector(kind="loop", origin_node=5),))

    def test_link_must_carry_one_frame_per_tick(self):
        with pytest.raises(ScenarioError):
            Scenario(link_rate=1e5, tick=1.0, duration=10.0)

    def test_unknown_injector_kind(self):
        with pytest.raises(ScenarioError):
            Injector(kind="gremlin")

    def test_profile_validation(self):
        with pytest.raises(ScenarioError):
            NormalBroadcastProfile(jitter=1.5)
        with pytest.raises(ScenarioError):
            NormalBroadcastProfile(burst_period=0.0)


class TestGeneratorShape:
    def test_raw_scale_reproduces_recorded_peak(self):
        profile = NormalBroadcastProfile(burst_scale=1.0)
        assert profile.ideal_broadcast(1.8, capacity=9999) == 40000.0
        assert profile.ideal_broadcast(0.0, capacity=9999) == 0.0

    def test_capacity_scale_hits_requested_peak_fraction(self):
        profile = NormalBroadcastProfile(broadcast_peak_fraction=0.08)
        assert profile.ideal_broadcast(1.8, capacity=238) == \
            pytest.approx(0.08 * 238)

    def test_profile_repeats_with_burst_period(self):
        profile = NormalBroadcastProfile()
        points = profile.ideal_profile(capacity=238)
        assert points[0].count == 0.0
        assert points[-1].t == pytest.approx(3.0)
        assert max(p.count for p in points) == pytest.approx(0.08 * 238)


class TestConservation:
    @pytest.mark.parametrize("name", sorted(scenario_presets()))
    def test_ledger_balances_every_tick(self, name):
        trace = run(preset(name))
        for rec in trace.records:
            led = rec.ledger
            assert led.generated + led.replicated - led.suppressed \
                - led.capped == led.delivered
            assert led.delivered == rec.stats.total_pkts

    def test_node_deliveries_sum_to_channel(self, loop_trace):
        for rec in loop_trace.records:
            assert sum(s.total_pkts for s in rec.samples) \
                == rec.stats.total_pkts
            assert sum(s.bcast_pkts for s in rec.samples) \
                == rec.stats.broadcast_pkts


class TestDeterminism:
    def test_identical_runs_produce_identical_traces(self):
        one = run(preset("loop-storm"))
        two = run(preset("loop-storm"))
        assert one.records == two.records
        assert one.tickets == two.tickets
        assert one.summary() == two.summary()

    def test_seed_changes_the_traffic(self):
        one = run(preset("normal"))
        two = run(preset("normal", seed=99))
        assert one.records != two.records


class TestLoopChain:
    def test_chain_multiplies_by_factor_until_capacity(self):
        scenario = loop_only_scenario(factor=2, n_ticks=12)
        trace = run(scenario)
        cap = trace.capacity_pkts
        got = [r.stats.total_pkts for r in trace.records]
        assert got == loop_expected_counts(12, start_tick=2, factor=2,
                                           cap=cap)

    def test_triple_factor_chain(self):
        scenario = loop_only_scenario(factor=3, n_ticks=10)
        trace = run(scenario)
        got = [r.stats.total_pkts for r in trace.records]
        assert got == loop_expected_counts(10, start_tick=2, factor=3,
                                           cap=trace.capacity_pkts)

    def test_saturated_chain_caps_at_capacity(self):
        trace = run(loop_only_scenario(factor=2, n_ticks=12))
        assert trace.records[-1].stats.total_pkts == trace.capacity_pkts
        assert trace.records[-1].ledger.capped > 0

    def test_reused_ipids_mark_the_loop(self):
        trace = run(loop_only_scenario(factor=2, n_ticks=12))
        late = trace.records[-1]
        assert late.classification.ipid_loop
        assert late.classification.verdict is Verdict.STORM

    def test_fresh_ipids_hide_the_loop_from_ipid_scan(self):
        scenario = loop_only_scenario(factor=2, n_ticks=12)
        scenario = dataclasses.replace(
            scenario,
            injectors=(dataclasses.replace(scenario.injectors[0],
                                           reuse_ipid=False),),
        )
        trace = run(scenario)
        assert not any(r.classification.ipid_loop for r in trace.records)

    def test_sim_window_matches_bruteforce_scan(self):
        trace = run(loop_only_scenario(factor=2, n_ticks=12))
        entries = []
        for rec in trace.records:
            for s in rec.samples:
                entries.extend((ipid, rec.t) for ipid in s.ipids)
        found, _ = ipid_loop_bruteforce(entries, 3, 100.0)
        assert found
        assert any(r.classification.ipid_loop for r in trace.records)


class TestPresets:
    def test_normal_run_is_quiet(self, normal_trace):
        assert normal_trace.tickets == []
        assert normal_trace.triggers == []
        assert all(r.classification.verdict in (Verdict.NORMAL, Verdict.IDLE)
                   for r in normal_trace.records)

    def test_normal_jitter_sweep_raises_nothing(self):
        for seed in range(5):
            trace = run(preset("normal", seed=seed))
            assert trace.tickets == []

    def test_loop_storm_detected_at_onset_tick(self, loop_trace):
        assert loop_trace.tickets
        first = loop_trace.tickets[0]
        assert first.t == 10.0
        assert first.node == 1                  # the looped port
        assert first.cause is TriggerCause.IPID_LOOP

    def test_loop_storm_suppression_starves_the_loop(self, loop_trace):
        # once node 1 is blocked the channel falls back to background level
        for rec in loop_trace.records:
            if rec.t >= 12.0:
                assert rec.classification.utilization < 0.60
        assert any(rec.ledger.suppressed > 0 for rec in loop_trace.records)

    def test_unprotected_loop_storm_saturates_within_five_ms(
            self, loop_trace_unprotected):
        onset = 10.0
        saturated = [r.t for r in loop_trace_unprotected.records
                     if r.classification.utilization > 0.60]
        assert saturated
        assert saturated[0] <= onset + 5.0
        assert max(r.classification.utilization
                   for r in loop_trace_unprotected.records) == 1.0

    def test_unprotected_loop_storm_is_classified_storm(
            self, loop_trace_unprotected):
        assert any(r.classification.verdict is Verdict.STORM
                   for r in loop_trace_unprotected.records)

    def test_smurf_reply_amplification_exact(self, smurf_trace):
        spoofs = sum(dict(r.delivered_by_kind).get("spoof", 0)
                     for r in smurf_trace.records)
        replies = sum(dict(r.delivered_by_kind).get("reply", 0)
                      for r in smurf_trace.records)
        n = smurf_trace.scenario.node_count
        assert spoofs > 0
        assert replies == (n - 1) * spoofs

    def test_faulty_nic_flagged_by_bandwidth_window(self, faulty_trace):
        assert len(faulty_trace.tickets) == 1
        ticket = faulty_trace.tickets[0]
        assert ticket.cause is TriggerCause.NBW_EXCEEDED
        assert ticket.node == 0
        assert ticket.observed > ticket.threshold

    def test_faulty_nic_detect_only_never_blocks(self, faulty_trace):
        assert all(r.ledger.suppressed == 0 for r in faulty_trace.records)

    def test_byte_budget_clips_every_window(self, table5_trace):
        window = 1000.0
        per_window: dict[int, int] = {}
        for rec in table5_trace.records:
            wid = int(rec.t // window)
            per_window[wid] = per_window.get(wid, 0) \
                + rec.stats.broadcast_bytes
        limit = 2.5e6
        assert len(per_window) == 4
        for wid, total in per_window.items():
            assert total <= limit + 1e-6
        # every tick individually stays under the budget too
        assert all(r.stats.broadcast_bytes <= limit
                   for r in table5_trace.records)

    def test_byte_budget_one_ticket_per_window(self, table5_trace):
        assert len(table5_trace.tickets) == 4
        assert all(t.cause is TriggerCause.NBW_EXCEEDED
                   for t in table5_trace.tickets)
        assert all(t.node == 0 for t in table5_trace.tickets)
        windows = sorted(int(t.t // 1000.0) for t in table5_trace.tickets)
        assert windows == [0, 1, 2, 3]

    def test_unprotected_chain_breaks_the_byte_budget(
            self, table5_trace_unprotected):
        worst = max(r.stats.broadcast_bytes
                    for r in table5_trace_unprotected.records)
        assert worst > 2.5e6
        assert table5_trace_unprotected.tickets == []

    def test_budget_windows_ramp_clip_and_reset(self, table5_trace):
        mb = [r.stats.broadcast_bytes / 1e6 for r in table5_trace.records]
        # 4 ticks per window: quiet ramp, growth, clipped burst, silence
        for w in range(4):
            a, b, c, d = mb[4 * w: 4 * w + 4]
            assert a < b < c
            assert d == 0.0

    def test_unknown_preset_rejected(self):
        with pytest.raises(ScenarioError):
            preset("no-such-scenario")
