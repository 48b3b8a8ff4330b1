"""Layer tiling, DRAM trace generation and optBlk selection for an output-stationary NPU.

Memory layout per layer, packed in allocation order and 512 B aligned:
ifmap (HWC, each row padded to a 64 B pitch), filters (K-major, packed),
ofmap (blocked by output-channel tile, each block HWk with 64 B row pitch).
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import constants
from model.enums import Direction, EventClass
from model.workload_model import LayerDescriptor, NpuConfig, OptBlkChoice, TilingPlan, TraceEvent
from utils.common_utils import align_down, align_up, aligned_span
from utils.exceptions import LayerTooLargeForSram, NonMonotonicCycle, ParseError
from utils.table_io import query_models_from_csv, read_csv_rows, write_csv_rows

logger = logging.getLogger(__name__)

LAYER_TABLE_HEADER = ["layer_id", "kind", "H", "W", "C", "R", "S", "K", "stride"]
TRACE_HEADER = ["cycle", "address_hex", "bytes", "dir", "class"]

Run = tuple[int, int]


def load_layer_table(path: str | Path) -> list[LayerDescriptor]:
    layers = query_models_from_csv(path, LayerDescriptor, LAYER_TABLE_HEADER)
    ids = [layer.layer_id for layer in layers]
    if ids != sorted(set(ids)):
        raise ParseError(f"{path}: layer ids must be unique and ascending")
    return layers


def ifmap_pitch(layer: LayerDescriptor, element_bytes: int = 1) -> int:
    return align_up(layer.ifmap_w * layer.channels * element_bytes, constants.BURST_BYTES)


def ofmap_pitch(layer: LayerDescriptor, k_channels: int, element_bytes: int = 1) -> int:
    return align_up(layer.ofmap_w * k_channels * element_bytes, constants.BURST_BYTES)


def filter_stride_bytes(layer: LayerDescriptor, element_bytes: int = 1) -> int:
    """Bytes of one filter (one output channel)."""
    in_channels = 1 if layer.channel_wise else layer.channels
    return layer.filter_h * layer.filter_w * in_channels * element_bytes


def _spans(total: int, tile: int) -> list[tuple[int, int]]:
    return [(start, min(start + tile, total)) for start in range(0, total, tile)]


def _aligned(start: int, end: int) -> Run:
    return align_down(start, constants.BURST_BYTES), align_up(end, constants.BURST_BYTES)


@dataclass(frozen=True)
class LayerLayout:
    base: int
    ifmap_bytes: int
    filter_bytes: int
    ofmap_bytes: int
    ofmap_block_offsets: tuple[int, ...]

    @property
    def ifmap_base(self) -> int:
        return self.base

    @property
    def filter_base(self) -> int:
        return self.base + self.ifmap_bytes

    @property
    def ofmap_base(self) -> int:
        return self.filter_base + self.filter_bytes

    @property
    def end(self) -> int:
        return self.ofmap_base + self.ofmap_bytes

    @property
    def tensor_bytes(self) -> int:
        return self.ifmap_bytes + self.filter_bytes + self.ofmap_bytes


def layer_layout(plan: TilingPlan, base: int = 0) -> LayerLayout:
    layer, eb = plan.layer, plan.element_bytes
    ifmap_bytes = layer.ifmap_h * ifmap_pitch(layer, eb)
    filter_bytes = align_up(layer.filters * filter_stride_bytes(layer, eb), constants.BURST_BYTES)
    offsets = []
    ofmap_bytes = 0
    for k0, k1 in _spans(layer.filters, plan.tile_k):
        offsets.append(ofmap_bytes)
        ofmap_bytes += layer.ofmap_h * ofmap_pitch(layer, k1 - k0, eb)
    return LayerLayout(
        base=base,
        ifmap_bytes=ifmap_bytes,
        filter_bytes=filter_bytes,
        ofmap_bytes=ofmap_bytes,
        ofmap_block_offsets=tuple(offsets),
    )


@dataclass(frozen=True)
class TileStep:
    """One output tile; runs are byte ranges relative to each tensor's base."""

    k_index: int
    row_index: int
    col_index: int
    macs: int
    ifmap_runs: list[Run] = field(default_factory=list)
    filter_runs: list[Run] = field(default_factory=list)
    ofmap_runs: list[Run] = field(default_factory=list)


def _ifmap_tile_runs(plan: TilingPlan, oy: tuple[int, int], ox: tuple[int, int]) -> list[Run]:
    layer, eb = plan.layer, plan.element_bytes
    pitch = ifmap_pitch(layer, eb)
    iy0, iy1 = oy[0] * layer.stride, (oy[1] - 1) * layer.stride + layer.filter_h
    if plan.full_width:
        # whole padded rows are contiguous
        return [(iy0 * pitch, iy1 * pitch)]
    ix0, ix1 = ox[0] * layer.stride, (ox[1] - 1) * layer.stride + layer.filter_w
    pixel = layer.channels * eb
    return [_aligned(row * pitch + ix0 * pixel, row * pitch + ix1 * pixel) for row in range(iy0, iy1)]


def _ofmap_tile_runs(
    plan: TilingPlan,
    layout: LayerLayout,
    k_index: int,
    k: tuple[int, int],
    oy: tuple[int, int],
    ox: tuple[int, int],
) -> list[Run]:
    eb = plan.element_bytes
    pitch = ofmap_pitch(plan.layer, k[1] - k[0], eb)
    block = layout.ofmap_block_offsets[k_index]
    if plan.full_width:
        return [(block + oy[0] * pitch, block + oy[1] * pitch)]
    pixel = (k[1] - k[0]) * eb
    return [
        _aligned(block + row * pitch + ox[0] * pixel, block + row * pitch + ox[1] * pixel)
        for row in range(oy[0], oy[1])
    ]


def tile_schedule(plan: TilingPlan, layout: LayerLayout | None = None) -> Iterator[TileStep]:
    layer = plan.layer
    layout = layout or layer_layout(plan)
    filter_bytes = filter_stride_bytes(layer, plan.element_bytes)
    row_spans = _spans(layer.ofmap_h, plan.tile_oh)
    col_spans = _spans(layer.ofmap_w, plan.tile_ow)
    for k_index, k in enumerate(_spans(layer.filters, plan.tile_k)):
        filter_runs = [_aligned(k[0] * filter_bytes, k[1] * filter_bytes)]
        for row_index, oy in enumerate(row_spans):
            for col_index, ox in enumerate(col_spans):
                yield TileStep(
                    k_index=k_index,
                    row_index=row_index,
                    col_index=col_index,
                    macs=layer.macs(oy[1] - oy[0], ox[1] - ox[0], k[1] - k[0]),
                    ifmap_runs=_ifmap_tile_runs(plan, oy, ox),
                    # filters stay resident across the spatial tiles of one k-tile
                    filter_runs=filter_runs if row_index == 0 and col_index == 0 else [],
                    ofmap_runs=_ofmap_tile_runs(plan, layout, k_index, k, oy, ox),
                )


def sram_footprint(layer: LayerDescriptor, element_bytes: int, tile_oh: int, tile_ow: int, tile_k: int) -> int:
    in_rows = (tile_oh - 1) * layer.stride + layer.filter_h
    in_cols = (tile_ow - 1) * layer.stride + layer.filter_w
    if tile_ow == layer.ofmap_w:
        ifmap = in_rows * ifmap_pitch(layer, element_bytes)
    else:
        ifmap = in_rows * (align_up(in_cols * layer.channels * element_bytes, constants.BURST_BYTES) + constants.BURST_BYTES)
    filters = align_up(tile_k * filter_stride_bytes(layer, element_bytes), constants.BURST_BYTES)
    if tile_k < layer.filters:
        filters += constants.BURST_BYTES
    ofmap = tile_oh * align_up(tile_ow * tile_k * element_bytes, constants.BURST_BYTES)
    return ifmap + filters + ofmap


def build_tiling_plan(layer: LayerDescriptor, npu: NpuConfig) -> TilingPlan:
    eb = npu.element_bytes
    tile_k = layer.filters
    while True:
        tile_oh, tile_ow = layer.ofmap_h, layer.ofmap_w
        while sram_footprint(layer, eb, tile_oh, tile_ow, tile_k) > npu.sram_bytes:
            if tile_oh > 1:
                tile_oh = -(-tile_oh // 2)
            elif tile_ow > 1:
                tile_ow = -(-tile_ow // 2)
            else:
                break
        if sram_footprint(layer, eb, tile_oh, tile_ow, tile_k) <= npu.sram_bytes:
            plan = TilingPlan(layer=layer, element_bytes=eb, tile_oh=tile_oh, tile_ow=tile_ow, tile_k=tile_k)
            logger.debug(
                "Layer %d: tiles %dx%dx%d (%d tiles)",
                layer.layer_id, tile_oh, tile_ow, tile_k,
                plan.n_row_tiles * plan.n_col_tiles * plan.n_k_tiles,
            )
            return plan
        if layer.channel_wise or tile_k == 1:
            raise LayerTooLargeForSram(
                f"layer {layer.layer_id}: a 1x1x{tile_k} output tile needs "
                f"{sram_footprint(layer, eb, 1, 1, tile_k)} B, SRAM holds {npu.sram_bytes} B"
            )
        tile_k = -(-tile_k // 2)


def analytic_ifmap_read_bytes(plan: TilingPlan) -> int:
    """Closed-form ifmap bytes fetched by the plan, halo re-reads included."""
    layer, eb = plan.layer, plan.element_bytes
    n_rows = plan.n_row_tiles
    rows_read = layer.used_rows + (n_rows - 1) * (layer.filter_h - layer.stride)
    if plan.full_width:
        per_pass = rows_read * ifmap_pitch(layer, eb)
    else:
        pixel = layer.channels * eb
        col_bytes = sum(
            aligned_span(ox0 * layer.stride * pixel, ((ox1 - 1) * layer.stride + layer.filter_w) * pixel, constants.BURST_BYTES)
            for ox0, ox1 in _spans(layer.ofmap_w, plan.tile_ow)
        )
        per_pass = rows_read * col_bytes
    return plan.n_k_tiles * per_pass


def _tile_cycles(macs: int, npu: NpuConfig) -> int:
    return max(1, math.ceil(macs / npu.pe_count))


def _split_run(start: int, end: int) -> Iterator[Run]:
    while start < end:
        stop = min(end, align_down(start, constants.MAX_EVENT_BYTES) + constants.MAX_EVENT_BYTES)
        yield start, stop
        start = stop


def _events(
    runs: Iterable[Run],
    base: int,
    cycle: int,
    direction: Direction,
    layer_id: int,
) -> Iterator[TraceEvent]:
    for start, end in runs:
        for s, e in _split_run(base + start, base + end):
            yield TraceEvent(cycle=cycle, address=s, nbytes=e - s, direction=direction, kind=EventClass.data, layer_id=layer_id)


def emit_layer_trace(
    plan: TilingPlan,
    npu: NpuConfig,
    layout: LayerLayout,
    start_cycle: int = 0,
) -> tuple[list[TraceEvent], int]:
    """Events of one layer and the cycle its last tile finishes computing."""
    events: list[TraceEvent] = []
    cursor = start_cycle
    fetch_cycle = start_cycle
    layer_id = plan.layer_id
    for step in tile_schedule(plan, layout):
        # double buffering: tile t is fetched while tile t-1 computes
        events.extend(_events(step.ifmap_runs, layout.ifmap_base, fetch_cycle, Direction.read, layer_id))
        events.extend(_events(step.filter_runs, layout.filter_base, fetch_cycle, Direction.read, layer_id))
        fetch_cycle = cursor
        cursor += _tile_cycles(step.macs, npu)
        events.extend(_events(step.ofmap_runs, layout.ofmap_base, cursor, Direction.write, layer_id))
    return events, cursor


def layout_model(plans: list[TilingPlan], base: int = 0) -> list[LayerLayout]:
    layouts = []
    for plan in plans:
        layout = layer_layout(plan, base)
        layouts.append(layout)
        base = align_up(layout.end, constants.MAX_EVENT_BYTES)
    return layouts


def emit_trace(plans: list[TilingPlan], npu: NpuConfig) -> list[TraceEvent]:
    events: list[TraceEvent] = []
    cycle = 0
    for plan, layout in zip(plans, layout_model(plans)):
        layer_events, cycle = emit_layer_trace(plan, npu, layout, cycle)
        events.extend(layer_events)
    # reads of tile t+1 are issued before writes of tile t complete
    events.sort(key=lambda e: e.cycle)
    return events


def model_compute_cycles(plans: list[TilingPlan], npu: NpuConfig) -> int:
    return sum(_tile_cycles(step.macs, npu) for plan in plans for step in tile_schedule(plan))


def opt_blk_runs(plan_i: TilingPlan, plan_next: TilingPlan | None) -> list[Run]:
    """Byte ranges of layer i's ofmap that get authenticated: its tile writes, then the next layer's reads."""
    layout = layer_layout(plan_i)
    runs = [run for step in tile_schedule(plan_i, layout) for run in step.ofmap_runs]
    if plan_next is None:
        runs.append((0, layout.ofmap_bytes))
    else:
        runs.extend(run for step in tile_schedule(plan_next) for run in step.ifmap_runs)
    return runs


def mac_bytes_hashed(runs: Iterable[Run], block_bytes: int) -> int:
    blocks = sum(aligned_span(start, end, block_bytes) for start, end in runs) // block_bytes
    return blocks * (block_bytes + constants.MAC_HEADER_BYTES)


def select_opt_blk(
    plan_i: TilingPlan,
    plan_next: TilingPlan | None,
    candidates: Iterable[int] = constants.OPT_BLK_CANDIDATES,
) -> OptBlkChoice:
    candidates = sorted(set(candidates))
    if not candidates:
        raise ValueError("candidate set is empty")
    runs = opt_blk_runs(plan_i, plan_next)
    scores = {size: mac_bytes_hashed(runs, size) for size in candidates}
    best = min(candidates, key=lambda size: (scores[size], -size))
    return OptBlkChoice(
        layer_id=plan_i.layer_id,
        block_bytes=best,
        redundant_mac_bytes=scores[max(candidates)] - scores[best],
        scores=scores,
    )


def select_model_opt_blks(
    plans: list[TilingPlan],
    candidates: Iterable[int] = constants.OPT_BLK_CANDIDATES,
) -> list[OptBlkChoice]:
    candidates = tuple(candidates)
    return [
        select_opt_blk(plan, plans[i + 1] if i + 1 < len(plans) else None, candidates)
        for i, plan in enumerate(plans)
    ]


def write_trace_file(path: str | Path, events: Iterable[TraceEvent]) -> Path:
    return write_csv_rows(
        path,
        TRACE_HEADER,
        (
            {
                "cycle": e.cycle,
                "address_hex": f"0x{e.address:x}",
                "bytes": e.nbytes,
                "dir": e.direction.value,
                "class": e.kind.value,
            }
            for e in events
        ),
    )


def _parse_trace_row(line_number: int, row: dict[str, str]) -> TraceEvent:
    try:
        address_text = row["address_hex"].strip()
        if not address_text.lower().startswith("0x"):
            raise ValueError(f"address '{address_text}' is not 0x-prefixed")
        return TraceEvent(
            cycle=int(row["cycle"]),
            address=int(address_text, 16),
            nbytes=int(row["bytes"]),
            direction=Direction(row["dir"].strip()),
            kind=EventClass(row["class"].strip()),
        )
    except ValueError as e:
        # pydantic's ValidationError is a ValueError too
        raise ParseError(f"bad trace row {row}: {e}", line_number) from e


def load_trace_file(path: str | Path) -> list[TraceEvent]:
    events: list[TraceEvent] = []
    for line_number, row in read_csv_rows(path, TRACE_HEADER):
        event = _parse_trace_row(line_number, row)
        if events and event.cycle < events[-1].cycle:
            raise NonMonotonicCycle(f"line {line_number}: cycle {event.cycle} after {events[-1].cycle}")
        events.append(event)
    return events
