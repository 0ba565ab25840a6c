"""File formats: round trips, determinism, layout of the channel CSV."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stormctl.agents import (
    AgentConfig,
    Policy,
    ThresholdDb,
    TriggerCause,
    TroubleTicket,
)
from stormctl.datasets import load_trace
from stormctl.growth import FitResult, TracePoint, fit_model, make_params
from stormctl.plotting import render_chart, write_chart
from stormctl.simulation import Injector, NormalBroadcastProfile, Scenario
from stormctl import tracefile

finite_times = st.floats(0.0, 1e4, allow_nan=False, allow_infinity=False)
finite_counts = st.floats(0.0, 1e9, allow_nan=False, allow_infinity=False)


class TestCountTraces:
    def test_round_trip_is_exact(self, tmp_path):
        points = load_trace("table1")
        path = tmp_path / "t.csv"
        tracefile.write_trace(points, path)
        assert tracefile.read_trace(path) == points

    @given(st.lists(st.tuples(finite_times, finite_counts), min_size=1,
                    max_size=30))
    @settings(max_examples=50)
    def test_round_trip_arbitrary_floats(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "t.csv"
        points = [TracePoint(t, c) for t, c in rows]
        tracefile.write_trace(points, path)
        assert tracefile.read_trace(path) == points

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            tracefile.read_trace(path)


class TestChannelCsv:
    def test_layout(self, tmp_path, normal_trace):
        path = tmp_path / "trace.csv"
        tracefile.write_channel_csv(normal_trace, path)
        rows = tracefile.read_channel_csv(path)
        per_tick = 1 + normal_trace.scenario.node_count
        assert len(rows) == per_tick * len(normal_trace.records)
        channel = [r for r in rows if r["node_id"] == "*"]
        assert len(channel) == len(normal_trace.records)
        assert channel[0]["verdict"] in ("idle", "normal", "busy", "storm")
        assert channel[0]["utilization"] is not None
        node = [r for r in rows if r["node_id"] != "*"]
        assert node[0]["verdict"] == ""
        assert node[0]["utilization"] is None

    def test_counts_match_records(self, tmp_path, normal_trace):
        path = tmp_path / "trace.csv"
        tracefile.write_channel_csv(normal_trace, path)
        rows = tracefile.read_channel_csv(path)
        first = next(r for r in rows if r["node_id"] == "*")
        assert first["bcast_pkts"] == normal_trace.records[0].stats.broadcast_pkts
        assert first["t_ms"] == normal_trace.records[0].t

    def test_broadcast_trace_extraction(self, normal_trace):
        points = tracefile.channel_broadcast_trace(normal_trace)
        assert len(points) == len(normal_trace.records)
        assert points[3].count == float(
            normal_trace.records[3].stats.broadcast_pkts)


class TestTickets:
    def make(self, n=3):
        return [
            TroubleTicket(i + 1, i % 2, 10.5 * i, TriggerCause.IPID_LOOP,
                          3.0, 3.0)
            for i in range(n)
        ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "tickets.jsonl"
        tickets = self.make()
        tracefile.write_tickets(tickets, path)
        assert tracefile.read_tickets(path) == tickets

    def test_one_json_object_per_line(self, tmp_path):
        path = tmp_path / "tickets.jsonl"
        tracefile.write_tickets(self.make(2), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        record = json.loads(lines[0])
        assert record["cause"] == "ipid_loop"
        assert list(record) == sorted(record)

    def test_empty_file_reads_empty(self, tmp_path):
        path = tmp_path / "tickets.jsonl"
        tracefile.write_tickets([], path)
        assert tracefile.read_tickets(path) == []


class TestParamsRecord:
    def test_round_trip(self, tmp_path):
        fit = fit_model(load_trace("table3"))
        path = tmp_path / "params.json"
        tracefile.write_params(fit, path)
        back = tracefile.read_params(path)
        assert back.params == fit.params
        assert back.rmse == fit.rmse

    def test_record_fields(self):
        fit = FitResult(make_params(500.0, 9e4, 1.5), 12.5)
        record = tracefile.params_to_dict(fit)
        assert set(record) == {"p_start", "p_end", "m", "a", "b", "rmse"}


class TestScenarioDocuments:
    def full_scenario(self):
        return Scenario(
            name="everything", node_count=4, link_rate=1e9, tick=0.5,
            duration=20.0, seed=42, frame_size=256,
            generator=NormalBroadcastProfile(jitter=0.02,
                                             broadcast_peak_fraction=0.1),
            injectors=(
                Injector(kind="loop", start_t=5.0, end_t=15.0, origin_node=2,
                         pass_interval=0.5, factor=3, reuse_ipid=False),
                Injector(kind="smurf", start_t=1.0, origin_node=1, rate=2.5),
            ),
            agents=AgentConfig(
                sample_period=0.5, deviation_threshold=0.07,
                consecutive_required=4, suppression_window=500.0,
                policy=Policy.BANDWIDTH_BASED,
                thresholds=ThresholdDb(nbw_permissible=900.0,
                                       byte_threshold_mb=1.25),
            ),
        )

    def test_round_trip(self, tmp_path):
        scenario = self.full_scenario()
        path = tmp_path / "scenario.json"
        tracefile.write_scenario(scenario, path)
        assert tracefile.read_scenario(path) == scenario

    def test_round_trip_minimal(self, tmp_path):
        scenario = Scenario(name="bare", node_count=2, link_rate=10e6,
                            duration=5.0)
        path = tmp_path / "scenario.json"
        tracefile.write_scenario(scenario, path)
        assert tracefile.read_scenario(path) == scenario

    def test_unsupported_schema_rejected(self):
        doc = tracefile.scenario_to_dict(self.full_scenario())
        doc["schema"] = 99
        with pytest.raises(ValueError):
            tracefile.scenario_from_dict(doc)


class TestSummary:
    def test_summary_is_json_stable(self, tmp_path, loop_trace):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        tracefile.write_summary(loop_trace.summary(), a)
        tracefile.write_summary(loop_trace.summary(), b)
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())["scenario"] == "loop-storm"


class TestCharts:
    def test_same_data_same_bytes(self):
        series = [("one", [(0.0, 0.0), (1.0, 5.0), (2.0, 3.0)])]
        assert render_chart(series, title="x") == \
            render_chart(series, title="x")

    def test_svg_document_structure(self, tmp_path):
        path = tmp_path / "chart.svg"
        write_chart([("burst", [(0.0, 0.0), (1.5, 40.0)])], path,
                    title="peak <40000>")
        text = path.read_text()
        assert text.startswith("<svg ")
        assert text.rstrip().endswith("</svg>")
        assert "polyline" in text
        assert "&lt;40000&gt;" in text      # labels are escaped

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            render_chart([("nothing", [])])
