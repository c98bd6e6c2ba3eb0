"""Benchmark harness: warm-up protocol, exact statistics, comparison table."""

import statistics
import time

import pytest

from exprforge.backends import StubBackend, TimingBackend
from exprforge.bench import (
    LatencyReport,
    build_bench_request,
    compare,
    relative_change_percent,
    run_benchmark,
)
from exprforge.errors import EditIterationError


def test_from_runs_matches_statistics_module():
    runs = [12.5, 14.0, 11.75, 13.25]
    rep = LatencyReport.from_runs("x", runs)
    assert rep.mean_ms == statistics.fmean(runs)
    assert rep.std_ms == statistics.stdev(runs)
    assert rep.n == 4
    # stored samples reproduce the stats exactly
    assert statistics.fmean(rep.runs) == rep.mean_ms
    assert statistics.stdev(rep.runs) == rep.std_ms


def test_from_runs_needs_two_samples():
    with pytest.raises(ValueError):
        LatencyReport.from_runs("x", [5.0])


def test_report_serialization_round_trip():
    import json

    rep = LatencyReport.from_runs("cfg-a", [10.0, 20.0, 30.0])
    doc = json.loads(rep.to_json())
    assert doc == rep.to_dict()
    again = LatencyReport.from_runs(doc["label"], doc["runs_ms"])
    assert again == rep


def test_build_bench_request_shape():
    req = build_bench_request(size=64)
    assert req.image.width == 64 and req.image.height == 64
    assert req.mask.selected_count == 32 * 32
    with pytest.raises(ValueError):
        build_bench_request(size=4)


def test_run_benchmark_reflects_backend_delay():
    req = build_bench_request(size=32)
    rep = run_benchmark(TimingBackend(0.05), req, n=4)
    assert rep.n == 4
    assert rep.mean_ms >= 50.0
    assert rep.mean_ms < 250.0  # sleep plus pipeline overhead, not more
    assert rep.label == "timing"


def test_run_benchmark_std_tracks_alternating_profile():
    req = build_bench_request(size=32)
    rep = run_benchmark(TimingBackend([0.01, 0.08]), req, n=4, label="alt")
    # warm-up consumes the first 0.01, timed runs see 0.08/0.01/0.08/0.01
    assert rep.label == "alt"
    assert rep.std_ms == statistics.stdev(rep.runs)
    assert rep.std_ms > 20.0


def test_run_benchmark_excludes_warmup():
    class FirstCallSlow:
        def __init__(self):
            self.calls = 0

        def descriptor(self):
            return {"id": "first-slow", "kind": "test"}

        def generate(self, sub_image, *a):
            self.calls += 1
            if self.calls == 1:
                time.sleep(0.25)
            return sub_image.copy()

    req = build_bench_request(size=32)
    backend = FirstCallSlow()
    rep = run_benchmark(backend, req, n=3)
    assert backend.calls == 4
    assert rep.mean_ms < 200.0  # the slow warm-up never enters the stats


def test_run_benchmark_rejects_small_n():
    with pytest.raises(ValueError):
        run_benchmark(StubBackend(mode="identity"), build_bench_request(size=32), n=1)


def test_run_benchmark_wraps_failures_with_run_index():
    class FailsOnThird:
        def __init__(self):
            self.calls = 0

        def descriptor(self):
            return {"id": "flaky", "kind": "test"}

        def generate(self, sub_image, *a):
            self.calls += 1
            if self.calls == 3:
                raise RuntimeError("gpu fell over")
            return sub_image.copy()

    with pytest.raises(EditIterationError) as exc:
        run_benchmark(FailsOnThird(), build_bench_request(size=32), n=5)
    assert exc.value.step == 1  # warm-up is call 1, timed run 0 is call 2


def test_run_benchmark_wraps_warmup_failure_as_minus_one():
    class AlwaysFails:
        def descriptor(self):
            return {"id": "dead", "kind": "test"}

        def generate(self, *a):
            raise RuntimeError("no")

    with pytest.raises(EditIterationError) as exc:
        run_benchmark(AlwaysFails(), build_bench_request(size=32), n=2)
    assert exc.value.step == -1


def test_relative_change_rounding():
    assert relative_change_percent(100.0, 50.0) == 50
    assert relative_change_percent(100.0, 100.0) == 0
    assert relative_change_percent(100.0, 150.0) == -50
    # 46.305...% rounds to 46
    assert relative_change_percent(4060.0, 2180.0) == 46
    # half away from zero
    assert relative_change_percent(200.0, 199.0) == 1
    assert relative_change_percent(1000.0, 995.0) == 1
    with pytest.raises(ValueError):
        relative_change_percent(0.0, 5.0)


def test_compare_table_contents():
    a = LatencyReport.from_runs("fp32", [4000.0, 4120.0])
    b = LatencyReport.from_runs("fp16", [2100.0, 2260.0])
    table = compare([a, b])
    lines = table.splitlines()
    assert "config" in lines[0] and "change" in lines[0]
    assert "baseline" in lines[1]
    assert "46% reduction" in lines[2]


def test_compare_reports_increase():
    a = LatencyReport.from_runs("a", [100.0, 100.0])
    b = LatencyReport.from_runs("b", [150.0, 150.0])
    assert "50% increase" in compare([a, b])


def test_compare_needs_two_reports():
    with pytest.raises(ValueError):
        compare([LatencyReport.from_runs("only", [1.0, 2.0])])
