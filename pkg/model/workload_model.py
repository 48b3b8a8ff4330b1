from typing import Annotated

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    model_validator,
)

import constants
from model.enums import Direction, EventClass, LayerKind

U64 = Annotated[int, Field(ge=0, lt=2 ** 64)]


class NpuConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    pe_rows: PositiveInt
    pe_cols: PositiveInt
    sram_bytes: PositiveInt
    freq_ghz: PositiveFloat
    dram_channels: PositiveInt
    dram_gbps_per_channel: PositiveFloat
    element_bytes: PositiveInt = 1

    @staticmethod
    def from_profile(name: str) -> "NpuConfig":
        try:
            params = constants.NPU_PROFILES[name]
        except KeyError:
            raise KeyError(f"unknown NPU profile '{name}', expected one of {sorted(constants.NPU_PROFILES)}")
        return NpuConfig(name=name, **params)

    @property
    def pe_count(self) -> int:
        return self.pe_rows * self.pe_cols


class LayerDescriptor(BaseModel):
    """One layer row of a model table; H/W include any padding."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    layer_id: NonNegativeInt
    kind: LayerKind
    ifmap_h: PositiveInt = Field(alias="H")
    ifmap_w: PositiveInt = Field(alias="W")
    channels: PositiveInt = Field(alias="C")
    filter_h: PositiveInt = Field(alias="R")
    filter_w: PositiveInt = Field(alias="S")
    filters: PositiveInt = Field(alias="K")
    stride: PositiveInt = 1

    @model_validator(mode="after")
    def geometry_is_consistent(self) -> "LayerDescriptor":
        if self.filter_h > self.ifmap_h or self.filter_w > self.ifmap_w:
            raise ValueError(f"layer {self.layer_id}: filter larger than ifmap")
        if self.kind is LayerKind.other and self.filters != self.channels:
            raise ValueError(f"layer {self.layer_id}: channel-wise layer needs K == C")
        return self

    @property
    def ofmap_h(self) -> int:
        return (self.ifmap_h - self.filter_h) // self.stride + 1

    @property
    def ofmap_w(self) -> int:
        return (self.ifmap_w - self.filter_w) // self.stride + 1

    @property
    def used_rows(self) -> int:
        return (self.ofmap_h - 1) * self.stride + self.filter_h

    @property
    def used_cols(self) -> int:
        return (self.ofmap_w - 1) * self.stride + self.filter_w

    @property
    def channel_wise(self) -> bool:
        return self.kind is LayerKind.other

    def macs(self, out_rows: int, out_cols: int, out_channels: int) -> int:
        reduction = self.filter_h * self.filter_w * (1 if self.channel_wise else self.channels)
        return out_rows * out_cols * out_channels * reduction

    @property
    def total_macs(self) -> int:
        return self.macs(self.ofmap_h, self.ofmap_w, self.filters)


class TilingPlan(BaseModel):
    """Output-stationary tiling: loop order k-tile > row-tile > col-tile."""

    model_config = ConfigDict(frozen=True)

    layer: LayerDescriptor
    element_bytes: PositiveInt = 1
    tile_oh: PositiveInt
    tile_ow: PositiveInt
    tile_k: PositiveInt
    order: str = "k>row>col"

    @model_validator(mode="after")
    def tiles_within_tensor(self) -> "TilingPlan":
        layer = self.layer
        if self.tile_oh > layer.ofmap_h or self.tile_ow > layer.ofmap_w or self.tile_k > layer.filters:
            raise ValueError(f"layer {layer.layer_id}: tile larger than ofmap")
        return self

    @property
    def layer_id(self) -> int:
        return self.layer.layer_id

    @property
    def n_row_tiles(self) -> int:
        return -(-self.layer.ofmap_h // self.tile_oh)

    @property
    def n_col_tiles(self) -> int:
        return -(-self.layer.ofmap_w // self.tile_ow)

    @property
    def n_k_tiles(self) -> int:
        return -(-self.layer.filters // self.tile_k)

    @property
    def overlap_rows(self) -> int:
        return max(self.layer.filter_h - self.layer.stride, 0)

    @property
    def overlap_cols(self) -> int:
        return max(self.layer.filter_w - self.layer.stride, 0)

    @property
    def full_width(self) -> bool:
        return self.tile_ow == self.layer.ofmap_w


class TraceEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    cycle: NonNegativeInt
    address: U64
    nbytes: PositiveInt
    direction: Direction
    kind: EventClass = EventClass.data
    # attribution from the workload generator, not part of the trace file format
    layer_id: NonNegativeInt | None = None

    @property
    def is_write(self) -> bool:
        return self.direction is Direction.write


class OptBlkChoice(BaseModel):
    model_config = ConfigDict(frozen=True)

    layer_id: NonNegativeInt
    block_bytes: PositiveInt
    redundant_mac_bytes: NonNegativeInt
    scores: dict[int, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def block_is_burst_multiple(self) -> "OptBlkChoice":
        if self.block_bytes % constants.AES_BLOCK_BYTES:
            raise ValueError("authentication block must be a multiple of 16 B")
        if self.scores and self.block_bytes not in self.scores:
            raise ValueError("chosen block size was not scored")
        return self
