"""Fixed-latency multi-channel DRAM model, in accelerator cycles.

Each event is split at interleave boundaries. A piece holds its channel for the
access latency plus its transfer (bytes / bytes_per_cycle); pieces queue FIFO
per channel in trace order. Busy cycles count transfer time only.
"""
import logging
import math
from typing import Iterable

from model.enums import EventClass
from model.scheme_model import CycleReport, DramConfig
from model.workload_model import TraceEvent
from utils.exceptions import MismatchedWorkload

logger = logging.getLogger(__name__)


def channel_of(config: DramConfig, address: int) -> int:
    return (address // config.interleave_bytes) % config.channels


def _pieces(config: DramConfig, event: TraceEvent) -> Iterable[tuple[int, int]]:
    address, end = event.address, event.address + event.nbytes
    while address < end:
        stop = min(end, (address // config.interleave_bytes + 1) * config.interleave_bytes)
        yield address, stop - address
        address = stop


def simulate(
    config: DramConfig,
    trace: Iterable[TraceEvent],
    compute_cycles: int = 0,
    layer_barrier: bool = False,
    workload: str = "",
    scheme: str = "",
) -> CycleReport:
    """
    Replay a cycle-ordered trace.

    :param compute_cycles: cycle at which the accelerator finishes computing; the run cannot end earlier.
    :param layer_barrier: a layer's first access waits until every earlier access has completed,
        and everything after it shifts by the stall.
    """
    bytes_per_cycle = config.bytes_per_cycle
    latency = config.latency_cycles
    channel_free = [0.0] * config.channels
    busy = [0.0] * config.channels
    last_completion = 0.0
    stall = 0.0
    current_layer = None
    data_bytes = 0
    metadata_bytes = 0

    for event in trace:
        issue = event.cycle + stall
        if layer_barrier and event.layer_id is not None and event.layer_id != current_layer:
            if current_layer is not None and last_completion > issue:
                stall += last_completion - issue
                issue = last_completion
            current_layer = event.layer_id
        if event.kind is EventClass.data:
            data_bytes += event.nbytes
        else:
            metadata_bytes += event.nbytes
        for address, nbytes in _pieces(config, event):
            channel = channel_of(config, address)
            transfer = nbytes / bytes_per_cycle
            start = max(issue, channel_free[channel])
            done = start + latency + transfer
            channel_free[channel] = done
            busy[channel] += transfer
            last_completion = max(last_completion, done)

    total = math.ceil(max(compute_cycles + stall, last_completion))
    logger.debug("%s/%s: %d cycles, stall %.1f", workload, scheme, total, stall)
    return CycleReport(
        workload=workload,
        scheme=scheme,
        dram=config,
        total_cycles=total,
        compute_cycles=compute_cycles,
        channel_busy_cycles=busy,
        data_bytes=data_bytes,
        metadata_bytes=metadata_bytes,
    )


def normalize(report: CycleReport, baseline_report: CycleReport) -> CycleReport:
    if report.workload != baseline_report.workload:
        raise MismatchedWorkload(f"workload '{report.workload}' vs baseline '{baseline_report.workload}'")
    if report.dram != baseline_report.dram:
        raise MismatchedWorkload(f"{report.workload}: DRAM configuration differs from the baseline")
    if report.data_bytes != baseline_report.data_bytes:
        raise MismatchedWorkload(
            f"{report.workload}: {report.data_bytes} data B vs {baseline_report.data_bytes} in the baseline"
        )
    if baseline_report.total_cycles:
        ratio = report.total_cycles / baseline_report.total_cycles
    else:
        ratio = 1.0 if not report.total_cycles else math.inf
    return report.model_copy(update={"normalized_runtime": ratio, "baseline": baseline_report.scheme})
