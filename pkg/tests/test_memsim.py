import pytest
from hypothesis import given, settings
from hypothesis.strategies import booleans, integers, lists, tuples

from app.memsim import channel_of, normalize, simulate
from app.schemes import process_trace
from model.scheme_model import DramConfig, SchemeConfig
from model.workload_model import NpuConfig
from tests.factories import data_event, streaming_writes
from utils.exceptions import MismatchedWorkload

MIB = 1024 * 1024


@pytest.fixture
def server_dram() -> DramConfig:
    return DramConfig.from_npu(NpuConfig.from_profile("server"))


class TestDramConfig:
    def test_server_rates(self, server_dram):
        assert server_dram.bytes_per_cycle == pytest.approx(5.0)
        assert server_dram.latency_cycles == pytest.approx(30.0)

    def test_edge_runs_in_accelerator_cycles(self):
        dram = DramConfig.from_npu(NpuConfig.from_profile("edge"))
        assert dram.bytes_per_cycle == pytest.approx(2.5 / 2.75)
        assert dram.latency_cycles == pytest.approx(82.5)

    def test_interleaving(self, server_dram):
        assert [channel_of(server_dram, a) for a in (0, 64, 128, 192, 256)] == [0, 1, 2, 3, 0]


class TestSimulate:
    def test_empty_trace(self, server_dram):
        report = simulate(server_dram, [])
        assert report.total_cycles == 0
        assert report.bandwidth_utilization == 0.0

    def test_single_read(self, server_dram):
        # 64 B at 5 B/cycle plus 30 cycles of latency
        assert simulate(server_dram, [data_event(0)]).total_cycles == 43

    def test_striped_reads(self, server_dram):
        trace = [data_event(i * 64) for i in range(400)]
        report = simulate(server_dram, trace)
        # 100 reads per channel, each holding it for 30 + 12.8 cycles
        assert report.total_cycles == pytest.approx(100 * 42.8, abs=1)
        assert report.channel_busy_cycles == pytest.approx([1280.0] * 4)

    def test_latency_occupies_the_channel(self, server_dram):
        trace = [data_event(i * 256) for i in range(8)]
        report = simulate(server_dram, trace)
        assert {channel_of(server_dram, e.address) for e in trace} == {0}
        assert report.total_cycles == pytest.approx(8 * (30 + 12.8), abs=1)
        assert report.channel_busy_cycles[0] == pytest.approx(8 * 12.8)

    def test_compute_bound(self, server_dram):
        report = simulate(server_dram, [data_event(0)], compute_cycles=10_000)
        assert report.total_cycles == 10_000

    def test_busy_time_is_conserved(self, server_dram):
        trace = [data_event(i * 192, 192, cycle=i) for i in range(50)]
        report = simulate(server_dram, trace)
        assert sum(report.channel_busy_cycles) == pytest.approx(50 * 192 / 5.0)
        assert max(report.channel_busy_cycles) <= report.total_cycles
        assert 0 < report.bandwidth_utilization <= 1

    def test_barrier_never_speeds_up(self, server_dram):
        trace = [data_event(i * 64, cycle=i, layer_id=i // 20) for i in range(100)]
        speculative = simulate(server_dram, trace)
        stalled = simulate(server_dram, trace, layer_barrier=True)
        assert stalled.total_cycles >= speculative.total_cycles

    def test_barrier_waits_for_the_previous_layer(self, server_dram):
        trace = [data_event(0, layer_id=0), data_event(64, layer_id=1)]
        stalled = simulate(server_dram, trace, layer_barrier=True)
        # the second layer issues only once the first read has landed
        assert simulate(server_dram, trace).total_cycles == 43
        assert stalled.total_cycles == 86

    @given(
        events=lists(tuples(integers(0, 5), integers(0, 255), integers(1, 8)), min_size=1, max_size=40),
        keep=lists(booleans(), min_size=40, max_size=40),
    )
    @settings(max_examples=60, deadline=None)
    def test_dropping_events_never_slows_down(self, events, keep):
        dram = DramConfig(gbps_per_channel=5.0, accel_freq_ghz=1.0)
        trace, cycle = [], 0
        for gap, line, bursts in events:
            cycle += gap
            trace.append(data_event(line * 64, bursts * 64, cycle=cycle))
        subset = [event for event, kept in zip(trace, keep) if kept]
        assert simulate(dram, subset).total_cycles <= simulate(dram, trace).total_cycles


class TestNormalize:
    def test_against_itself(self, server_dram):
        report = simulate(server_dram, [data_event(0)], workload="w", scheme="unprotected")
        normalized = normalize(report, report)
        assert normalized.normalized_runtime == 1.0
        assert normalized.baseline == "unprotected"

    def test_zero_baseline(self, server_dram):
        report = simulate(server_dram, [], workload="w")
        assert normalize(report, report).normalized_runtime == 1.0

    def test_workload_mismatch(self, server_dram):
        a = simulate(server_dram, [data_event(0)], workload="a")
        b = simulate(server_dram, [data_event(0)], workload="b")
        with pytest.raises(MismatchedWorkload):
            normalize(a, b)

    def test_dram_mismatch(self, server_dram):
        edge = DramConfig.from_npu(NpuConfig.from_profile("edge"))
        with pytest.raises(MismatchedWorkload):
            normalize(simulate(server_dram, [data_event(0)], workload="w"), simulate(edge, [data_event(0)], workload="w"))

    def test_data_mismatch(self, server_dram):
        a = simulate(server_dram, [data_event(0)], workload="w")
        b = simulate(server_dram, [data_event(0, 128)], workload="w")
        with pytest.raises(MismatchedWorkload):
            normalize(a, b)

    def test_bandwidth_bound_mac_overhead(self, server_dram):
        data = streaming_writes(MIB)
        baseline = simulate(server_dram, data, workload="stream", scheme="unprotected")
        augmented, _ = process_trace(SchemeConfig.from_name("mgx_64"), data)
        protected = normalize(simulate(server_dram, augmented, workload="stream", scheme="mgx_64"), baseline)
        # one 8 B MAC per 64 B block
        assert protected.normalized_runtime == pytest.approx(1.125, rel=0.01)

    def test_compute_hides_metadata(self, server_dram):
        data = streaming_writes(64 * 1024)
        augmented, _ = process_trace(SchemeConfig.from_name("mgx_64"), data)
        baseline = simulate(server_dram, data, compute_cycles=10 ** 7, workload="w")
        protected = simulate(server_dram, augmented, compute_cycles=10 ** 7, workload="w")
        assert normalize(protected, baseline).normalized_runtime == 1.0
