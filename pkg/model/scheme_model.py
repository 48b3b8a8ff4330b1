import math
from typing import Iterable

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveFloat, PositiveInt, field_validator

import constants
from model.enums import EventClass, MacResidency, SchemeKind
from model.workload_model import NpuConfig, TraceEvent

_SCHEME_PREFIXES = {
    "sgx": SchemeKind.sgx_like,
    "mgx": SchemeKind.mgx_like,
}


class SchemeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: SchemeKind
    protection_block_bytes: PositiveInt = 64
    layer_mac_residency: MacResidency = MacResidency.off_chip
    protected_memory_bytes: PositiveInt = constants.PROTECTED_MEMORY_BYTES
    vn_cache_bytes: PositiveInt = constants.VN_CACHE_BYTES
    mac_cache_bytes: PositiveInt = constants.MAC_CACHE_BYTES

    @field_validator("protection_block_bytes")
    @classmethod
    def known_granularity(cls, value: int) -> int:
        if value not in constants.PROTECTION_BLOCK_CHOICES:
            raise ValueError(f"protection block must be one of {constants.PROTECTION_BLOCK_CHOICES}")
        return value

    @staticmethod
    def from_name(name: str, layer_mac_residency: MacResidency = MacResidency.off_chip) -> "SchemeConfig":
        """Parse a scheme label such as `sgx_64`, `mgx_512`, `seda` or `unprotected`."""
        name = name.strip().lower()
        if name == "unprotected":
            return SchemeConfig(kind=SchemeKind.unprotected)
        if name == "seda":
            return SchemeConfig(kind=SchemeKind.seda, layer_mac_residency=layer_mac_residency)
        prefix, _, granularity = name.partition("_")
        if prefix not in _SCHEME_PREFIXES or not granularity.isdigit():
            raise ValueError(f"unknown scheme '{name}'")
        return SchemeConfig(kind=_SCHEME_PREFIXES[prefix], protection_block_bytes=int(granularity))

    @property
    def label(self) -> str:
        if self.kind is SchemeKind.unprotected:
            return "unprotected"
        if self.kind is SchemeKind.seda:
            return "seda"
        return f"{self.kind.value.split('_')[0]}_{self.protection_block_bytes}"

    @property
    def granularity_label(self) -> str:
        if self.kind is SchemeKind.unprotected:
            return "-"
        if self.kind is SchemeKind.seda:
            return "optBlk"
        return f"{self.protection_block_bytes}B"

    @property
    def block_count(self) -> int:
        return self.protected_memory_bytes // self.protection_block_bytes

    @property
    def vn_base(self) -> int:
        return self.protected_memory_bytes

    @property
    def mac_base(self) -> int:
        return self.vn_base + self.block_count * constants.VN_LINE_BYTES_PER_BLOCK

    @property
    def tree_base(self) -> int:
        return self.mac_base + self.block_count * constants.MAC_BYTES


class BonsaiTree(BaseModel):
    """Integrity tree over the VN lines; levels 1..depth live off-chip, the root sits on-chip and costs no traffic."""

    model_config = ConfigDict(frozen=True)

    arity: PositiveInt = constants.TREE_ARITY
    leaf_count: PositiveInt
    base: NonNegativeInt = 0
    node_bytes: PositiveInt = constants.CACHE_LINE_BYTES

    @field_validator("arity")
    @classmethod
    def branching(cls, value: int) -> int:
        if value < 2:
            raise ValueError("tree arity must be >= 2")
        return value

    @staticmethod
    def for_scheme(config: SchemeConfig) -> "BonsaiTree":
        return BonsaiTree(leaf_count=config.block_count, base=config.tree_base)

    @property
    def depth(self) -> int:
        # integer form of ceil(log_arity(leaf_count))
        depth, span = 0, 1
        while span < self.leaf_count:
            span *= self.arity
            depth += 1
        return depth

    def nodes_at(self, level: int) -> int:
        return math.ceil(self.leaf_count / self.arity ** level)

    def node_index(self, block: int, level: int) -> int:
        return block // self.arity ** level

    def node_address(self, block: int, level: int) -> int:
        if not 1 <= level <= self.depth:
            raise ValueError(f"tree level {level} outside 1..{self.depth}")
        offset = sum(self.nodes_at(lower) for lower in range(1, level))
        return self.base + (offset + self.node_index(block, level)) * self.node_bytes

    def path(self, block: int) -> list[int]:
        """Node addresses from the leaf-most level up to the level just below the root."""
        return [self.node_address(block, level) for level in range(1, self.depth + 1)]


class CacheStats(BaseModel):
    name: str
    lookups: NonNegativeInt = 0
    hits: NonNegativeInt = 0
    misses: NonNegativeInt = 0
    fill_bytes: NonNegativeInt = 0
    writebacks: NonNegativeInt = 0
    writeback_bytes: NonNegativeInt = 0
    dirty_bytes_created: NonNegativeInt = 0
    capacity_bytes: NonNegativeInt = 0
    peak_occupancy_bytes: NonNegativeInt = 0

    @property
    def consistent(self) -> bool:
        return self.hits + self.misses == self.lookups and self.writeback_bytes <= self.dirty_bytes_created

    @property
    def within_capacity(self) -> bool:
        return self.peak_occupancy_bytes <= self.capacity_bytes


_STAT_FIELDS = {
    EventClass.data: "data",
    EventClass.vn: "vn",
    EventClass.mac: "mac",
    EventClass.tree_node: "tree",
}


class SchemeStats(BaseModel):
    data_read_bytes: NonNegativeInt = 0
    data_write_bytes: NonNegativeInt = 0
    vn_read_bytes: NonNegativeInt = 0
    vn_write_bytes: NonNegativeInt = 0
    mac_read_bytes: NonNegativeInt = 0
    mac_write_bytes: NonNegativeInt = 0
    tree_read_bytes: NonNegativeInt = 0
    tree_write_bytes: NonNegativeInt = 0
    total_events: NonNegativeInt = 0
    caches: list[CacheStats] = Field(default_factory=list)

    @staticmethod
    def from_trace(events: Iterable[TraceEvent], caches: Iterable[CacheStats] = ()) -> "SchemeStats":
        totals: dict[str, int] = {}
        count = 0
        for event in events:
            field = f"{_STAT_FIELDS[event.kind]}_{'write' if event.is_write else 'read'}_bytes"
            totals[field] = totals.get(field, 0) + event.nbytes
            count += 1
        return SchemeStats(total_events=count, caches=list(caches), **totals)

    @property
    def data_bytes(self) -> int:
        return self.data_read_bytes + self.data_write_bytes

    @property
    def vn_bytes(self) -> int:
        return self.vn_read_bytes + self.vn_write_bytes

    @property
    def mac_bytes(self) -> int:
        return self.mac_read_bytes + self.mac_write_bytes

    @property
    def tree_bytes(self) -> int:
        return self.tree_read_bytes + self.tree_write_bytes

    @property
    def metadata_bytes(self) -> int:
        return self.vn_bytes + self.mac_bytes + self.tree_bytes


class DramConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    channels: PositiveInt = constants.DRAM_CHANNELS
    gbps_per_channel: PositiveFloat
    access_latency_ns: PositiveFloat = constants.DRAM_ACCESS_LATENCY_NS
    interleave_bytes: PositiveInt = constants.DRAM_INTERLEAVE_BYTES
    accel_freq_ghz: PositiveFloat

    @staticmethod
    def from_npu(npu: NpuConfig, access_latency_ns: float = constants.DRAM_ACCESS_LATENCY_NS) -> "DramConfig":
        return DramConfig(
            channels=npu.dram_channels,
            gbps_per_channel=npu.dram_gbps_per_channel,
            access_latency_ns=access_latency_ns,
            accel_freq_ghz=npu.freq_ghz,
        )

    @property
    def bytes_per_cycle(self) -> float:
        """Per-channel bytes moved per accelerator cycle (GB/s over GHz)."""
        return self.gbps_per_channel / self.accel_freq_ghz

    @property
    def latency_cycles(self) -> float:
        return self.access_latency_ns * self.accel_freq_ghz


class CycleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    workload: str
    scheme: str
    dram: DramConfig
    total_cycles: NonNegativeInt
    compute_cycles: NonNegativeInt = 0
    channel_busy_cycles: list[float]
    data_bytes: NonNegativeInt
    metadata_bytes: NonNegativeInt
    normalized_runtime: float | None = None
    baseline: str | None = None

    @property
    def bandwidth_utilization(self) -> float:
        if not self.total_cycles:
            return 0.0
        return sum(self.channel_busy_cycles) / (self.total_cycles * len(self.channel_busy_cycles))
