"""Protection schemes as trace transformers: data events in, data plus security-metadata events out.

Metadata regions sit above the protected range, in this order:
VN lines (8 VNs per 64 B line), MACs (8 B per protection block), tree levels 1..depth.
SeDA layer MACs reuse the MAC region: an 8 B MAC at the start of one 64 B line per
layer boundary, so consecutive boundaries fall on consecutive DRAM channels.
"""
import logging
from dataclasses import dataclass
from typing import Iterable

import constants
from app.metadata_cache import CacheAccess, MetadataCache
from model.enums import Direction, EventClass, MacResidency, SchemeKind
from model.scheme_model import BonsaiTree, SchemeConfig, SchemeStats
from model.workload_model import TraceEvent
from utils.exceptions import AddressOutOfRange, MissingLayerContext, UnalignedDataEvent, VersionOverflow

logger = logging.getLogger(__name__)


class VersionTable:
    """Per-block version numbers; blocks never written are at version 0."""

    def __init__(self, vn_bits: int = constants.VN_BITS):
        self.limit = 1 << vn_bits
        self._versions: dict[int, int] = {}

    def current(self, block: int) -> int:
        return self._versions.get(block, 0)

    def bump(self, block: int) -> int:
        version = self.current(block) + 1
        if version >= self.limit:
            raise VersionOverflow(f"block {block}: VN exhausted at {self.limit - 1}")
        self._versions[block] = version
        return version

    def __len__(self) -> int:
        return len(self._versions)


@dataclass
class MetadataCaches:
    mac: MetadataCache
    vn: MetadataCache | None = None

    @staticmethod
    def for_scheme(config: SchemeConfig) -> "MetadataCaches":
        mac = MetadataCache(
            "mac_cache",
            config.mac_cache_bytes,
            sector_bytes=constants.MAC_SECTOR_BYTES,
            write_fills=False,
        )
        vn = MetadataCache("vn_cache", config.vn_cache_bytes) if config.kind is SchemeKind.sgx_like else None
        return MetadataCaches(mac=mac, vn=vn)

    def all(self) -> list[MetadataCache]:
        return [cache for cache in (self.vn, self.mac) if cache is not None]


@dataclass(frozen=True)
class LayerContext:
    """Index of the first and last data event of every layer in a trace."""

    first_index: dict[int, int]
    last_index: dict[int, int]

    @staticmethod
    def from_trace(trace: Iterable[TraceEvent]) -> "LayerContext":
        first: dict[int, int] = {}
        last: dict[int, int] = {}
        for index, event in enumerate(trace):
            if event.layer_id is None:
                raise MissingLayerContext(f"event {index} at 0x{event.address:x} carries no layer id")
            first.setdefault(event.layer_id, index)
            last[event.layer_id] = index
        return LayerContext(first_index=first, last_index=last)


def protected_blocks(event: TraceEvent, config: SchemeConfig) -> range:
    if event.address % constants.BURST_BYTES or event.nbytes % constants.BURST_BYTES:
        raise UnalignedDataEvent(
            f"data event 0x{event.address:x}+{event.nbytes} is not {constants.BURST_BYTES} B aligned"
        )
    end = event.address + event.nbytes
    if end > config.protected_memory_bytes:
        raise AddressOutOfRange(f"data event ends at 0x{end:x}, beyond the protected range")
    block_bytes = config.protection_block_bytes
    return range(event.address // block_bytes, -(-end // block_bytes))


def _meta_event(source: TraceEvent, kind: EventClass, direction: Direction, address: int, nbytes: int) -> TraceEvent:
    return TraceEvent(
        cycle=source.cycle,
        address=address,
        nbytes=nbytes,
        direction=direction,
        kind=kind,
        layer_id=source.layer_id,
    )


def _vn_cache_class(address: int, config: SchemeConfig) -> EventClass:
    return EventClass.tree_node if address >= config.tree_base else EventClass.vn


def _transfers(
    source: TraceEvent,
    result: CacheAccess,
    fill_class: EventClass,
    classify=None,
) -> list[TraceEvent]:
    events = []
    if result.fill is not None:
        events.append(_meta_event(source, fill_class, Direction.read, *result.fill))
    for address, nbytes in result.writebacks:
        kind = classify(address) if classify else fill_class
        events.append(_meta_event(source, kind, Direction.write, address, nbytes))
    return events


def coalesce(events: list[TraceEvent]) -> list[TraceEvent]:
    """Merge back-to-back metadata transfers of one class and direction over adjacent addresses."""
    merged: list[TraceEvent] = []
    for event in events:
        prev = merged[-1] if merged else None
        if (
            prev is not None
            and prev.kind is event.kind
            and prev.direction is event.direction
            and prev.cycle == event.cycle
            and prev.address + prev.nbytes == event.address
        ):
            merged[-1] = prev.model_copy(update={"nbytes": prev.nbytes + event.nbytes})
        else:
            merged.append(event)
    return merged


def sgx_access(
    event: TraceEvent,
    caches: MetadataCaches,
    tree: BonsaiTree,
    config: SchemeConfig,
    versions: VersionTable | None = None,
) -> list[TraceEvent]:
    """VN through the VN cache, tree walk on a VN miss, MAC through the MAC cache."""
    vn_cache = caches.vn
    if vn_cache is None:
        raise ValueError("SGX-like scheme needs a VN cache")
    classify = lambda address: _vn_cache_class(address, config)  # noqa: E731
    write = event.is_write
    events: list[TraceEvent] = []
    for block in protected_blocks(event, config):
        vn_result = vn_cache.access(config.vn_base + block * constants.VN_LINE_BYTES_PER_BLOCK, write)
        events.extend(_transfers(event, vn_result, EventClass.vn, classify))
        if not vn_result.hit:
            # verify the fetched VN line up to the first level already on-chip
            for node_address in tree.path(block):
                node_result = vn_cache.access(node_address)
                events.extend(_transfers(event, node_result, EventClass.tree_node, classify))
                if node_result.hit:
                    break
        if write:
            if versions is not None:
                versions.bump(block)
            for node_address in tree.path(block):
                vn_cache.mark_dirty(node_address)
        mac_result = caches.mac.access(config.mac_base + block * constants.MAC_BYTES, write)
        events.extend(_transfers(event, mac_result, EventClass.mac))
    return coalesce(events)


def mgx_access(
    event: TraceEvent,
    mac_cache: MetadataCache,
    config: SchemeConfig,
    versions: VersionTable | None = None,
) -> list[TraceEvent]:
    # VNs are regenerated on-chip, so only MACs travel
    write = event.is_write
    events: list[TraceEvent] = []
    for block in protected_blocks(event, config):
        if write and versions is not None:
            versions.bump(block)
        result = mac_cache.access(config.mac_base + block * constants.MAC_BYTES, write)
        events.extend(_transfers(event, result, EventClass.mac))
    return coalesce(events)


def layer_mac_address(config: SchemeConfig, slot: int) -> int:
    return config.mac_base + slot * constants.CACHE_LINE_BYTES


def seda_access(
    event: TraceEvent,
    index: int,
    config: SchemeConfig,
    layer_context: LayerContext,
) -> list[TraceEvent]:
    """
    optBlk MACs are folded on-chip, so per-block MACs never reach DRAM.
    Off-chip layer MACs cost one 8 B read when a layer starts (the MAC of its input)
    and one 8 B write after its last access (the MAC of its output).
    """
    if event.layer_id is None:
        raise MissingLayerContext(f"event at 0x{event.address:x} carries no layer id")
    if config.layer_mac_residency is MacResidency.on_chip:
        return []
    layer_id = event.layer_id
    events = []
    if layer_context.first_index.get(layer_id) == index:
        events.append(
            _meta_event(event, EventClass.mac, Direction.read, layer_mac_address(config, layer_id), constants.MAC_BYTES)
        )
    if layer_context.last_index.get(layer_id) == index:
        events.append(
            _meta_event(event, EventClass.mac, Direction.write, layer_mac_address(config, layer_id + 1), constants.MAC_BYTES)
        )
    return events


def _flush_events(
    caches: MetadataCaches,
    config: SchemeConfig,
    last: TraceEvent,
) -> list[TraceEvent]:
    events: list[TraceEvent] = []
    if caches.vn is not None:
        for address, nbytes in caches.vn.flush():
            events.append(_meta_event(last, _vn_cache_class(address, config), Direction.write, address, nbytes))
    for address, nbytes in caches.mac.flush():
        events.append(_meta_event(last, EventClass.mac, Direction.write, address, nbytes))
    return coalesce(events)


def process_trace(config: SchemeConfig, data_trace: list[TraceEvent]) -> tuple[list[TraceEvent], SchemeStats]:
    """Interleave each data event with the metadata traffic it causes; dirty metadata is flushed at the end."""
    for index, event in enumerate(data_trace):
        if event.kind is not EventClass.data:
            raise ValueError(f"event {index} is {event.kind.value}, expected a data-only trace")
    if config.kind is SchemeKind.unprotected:
        return list(data_trace), SchemeStats.from_trace(data_trace)

    augmented: list[TraceEvent] = []
    versions = VersionTable()
    caches = MetadataCaches.for_scheme(config)
    tree = BonsaiTree.for_scheme(config) if config.kind is SchemeKind.sgx_like else None
    context = LayerContext.from_trace(data_trace) if config.kind is SchemeKind.seda else None

    for index, event in enumerate(data_trace):
        augmented.append(event)
        if config.kind is SchemeKind.sgx_like:
            augmented.extend(sgx_access(event, caches, tree, config, versions))  # type: ignore
        elif config.kind is SchemeKind.mgx_like:
            augmented.extend(mgx_access(event, caches.mac, config, versions))
        else:
            blocks = protected_blocks(event, config)
            if event.is_write:
                for block in blocks:
                    versions.bump(block)
            augmented.extend(seda_access(event, index, config, context))  # type: ignore
    if data_trace and config.kind is not SchemeKind.seda:
        augmented.extend(_flush_events(caches, config, data_trace[-1]))

    cache_stats = [cache.stats.model_copy() for cache in caches.all()] if config.kind is not SchemeKind.seda else []
    stats = SchemeStats.from_trace(augmented, cache_stats)
    logger.info(
        "%s: %d data B, %d metadata B (vn %d, mac %d, tree %d), %d blocks versioned",
        config.label, stats.data_bytes, stats.metadata_bytes,
        stats.vn_bytes, stats.mac_bytes, stats.tree_bytes, len(versions),
    )
    return augmented, stats
