from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator

import constants
from utils.exceptions import VersionOverflow

U32 = Annotated[int, Field(ge=0, lt=2 ** 32)]
U64 = Annotated[int, Field(ge=0, lt=2 ** 64)]


def _check_block(value: bytes) -> bytes:
    if len(value) != constants.AES_BLOCK_BYTES:
        raise ValueError(f"expected {constants.AES_BLOCK_BYTES} bytes, got {len(value)}")
    return value


class _SecretKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    # excluded from dumps and repr so keys never reach a report or a log line
    key: bytes = Field(exclude=True, repr=False)

    @field_validator("key")
    @classmethod
    def key_is_128_bits(cls, value: bytes) -> bytes:
        return _check_block(value)

    @classmethod
    def from_hex(cls, hex_str: str):
        return cls(key=bytes.fromhex(hex_str))


class AesKey(_SecretKey):
    """K_e, the 128-bit encryption key."""


class MacKey(_SecretKey):
    """K_h, the 128-bit MAC key."""


class KeySet(BaseModel):
    model_config = ConfigDict(frozen=True)

    enc: AesKey
    mac: MacKey

    @model_validator(mode="after")
    def keys_are_distinct(self) -> "KeySet":
        if self.enc.key == self.mac.key:
            raise ValueError("encryption and MAC keys must differ")
        return self


class RoundKeySchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    round_keys: tuple[bytes, ...] = Field(repr=False)

    @field_validator("round_keys")
    @classmethod
    def eleven_round_keys(cls, value: tuple[bytes, ...]) -> tuple[bytes, ...]:
        if len(value) != constants.ROUND_KEY_COUNT:
            raise ValueError(f"AES-128 schedule has {constants.ROUND_KEY_COUNT} round keys, got {len(value)}")
        for round_key in value:
            _check_block(round_key)
        return value


class CounterBlock(BaseModel):
    """PA || VN, the AES-CTR counter of one protection block."""

    model_config = ConfigDict(frozen=True)

    pa: U64
    vn: U64 = 0
    vn_bits: int = Field(default=constants.VN_BITS, ge=1, le=64)

    @model_validator(mode="after")
    def vn_fits_width(self) -> "CounterBlock":
        if self.vn >= 1 << self.vn_bits:
            raise ValueError(f"vn {self.vn} exceeds {self.vn_bits}-bit width")
        return self

    def serialize(self) -> bytes:
        return self.pa.to_bytes(8, "big") + self.vn.to_bytes(8, "big")

    def bumped(self) -> "CounterBlock":
        if self.vn + 1 >= 1 << self.vn_bits:
            raise VersionOverflow(f"VN of PA {self.pa:#x} would wrap past {self.vn_bits} bits")
        return self.model_copy(update={"vn": self.vn + 1})


class PadGroup(BaseModel):
    model_config = ConfigDict(frozen=True)

    base: bytes = Field(repr=False)
    segments: tuple[bytes, ...] = Field(repr=False)

    @field_validator("base")
    @classmethod
    def base_is_block(cls, value: bytes) -> bytes:
        return _check_block(value)

    @field_validator("segments")
    @classmethod
    def segments_are_blocks(cls, value: tuple[bytes, ...]) -> tuple[bytes, ...]:
        if not value:
            raise ValueError("pad group needs at least one segment")
        for segment in value:
            _check_block(segment)
        return value

    @property
    def block_bytes(self) -> int:
        return len(self.segments) * constants.AES_BLOCK_BYTES


class ProtectionBlock(BaseModel):
    model_config = ConfigDict(frozen=True)

    payload: bytes

    @field_validator("payload")
    @classmethod
    def whole_segments(cls, value: bytes) -> bytes:
        if not value or len(value) % constants.AES_BLOCK_BYTES:
            raise ValueError(f"block length {len(value)} is not a positive multiple of {constants.AES_BLOCK_BYTES}")
        return value

    @property
    def n_segments(self) -> int:
        return len(self.payload) // constants.AES_BLOCK_BYTES

    def segments(self) -> list[bytes]:
        step = constants.AES_BLOCK_BYTES
        return [self.payload[i:i + step] for i in range(0, len(self.payload), step)]

    @staticmethod
    def from_segments(segments: list[bytes]) -> "ProtectionBlock":
        return ProtectionBlock(payload=b"".join(segments))


class EngineCostModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    aes_area_units: PositiveFloat = constants.AES_AREA_UNITS
    aes_power_units: PositiveFloat = constants.AES_POWER_UNITS
    xor_bank_area_units: PositiveFloat = constants.XOR_BANK_AREA_UNITS
    xor_bank_power_units: PositiveFloat = constants.XOR_BANK_POWER_UNITS
    aes_latency_cycles: PositiveFloat = constants.AES_LATENCY_CYCLES
    # unset: one 16 B block per aes_latency_cycles
    aes_throughput_bytes_per_cycle: PositiveFloat | None = None

    @property
    def pad_bytes_per_cycle(self) -> float:
        if self.aes_throughput_bytes_per_cycle is not None:
            return self.aes_throughput_bytes_per_cycle
        return constants.AES_BLOCK_BYTES / self.aes_latency_cycles


class BlockPosition(BaseModel):
    model_config = ConfigDict(frozen=True)

    layer_id: U32
    fmap_idx: U32
    blk_idx: U32

    def serialize(self) -> bytes:
        return (
            self.layer_id.to_bytes(4, "big")
            + self.fmap_idx.to_bytes(4, "big")
            + self.blk_idx.to_bytes(4, "big")
        )


class MacTag(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: U64


class LayerMacAccumulator(BaseModel):
    layer_id: U32
    folded: U64 = 0
    count: int = Field(default=0, ge=0)
    expected_count: int | None = Field(default=None, ge=0)

    @property
    def complete(self) -> bool:
        return self.expected_count is not None and self.count == self.expected_count


class ModelMacAccumulator(BaseModel):
    folded: U64 = 0
    layer_count: int = Field(default=0, ge=0)
    sealed: bool = False
