from pathlib import Path

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveInt,
    field_validator,
    model_validator,
)

import constants
from model.crypto_model import BlockPosition, CounterBlock, ProtectionBlock
from model.enums import AttackKind, LayerVerify, MacMode, MacResidency, NpuProfile, PadMode
from model.workload_model import NpuConfig


class StoredBlock(BaseModel):
    """A ciphertext block as it sits in memory, with the slot it sits in."""

    model_config = ConfigDict(frozen=True)

    cipher: ProtectionBlock
    ctr: CounterBlock
    pos: BlockPosition


class AttackTarget(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    attack: AttackKind
    pad_mode: PadMode = PadMode.pad_group
    mac_mode: MacMode = MacMode.position_bound
    block_bytes: PositiveInt = 64

    @field_validator("block_bytes")
    @classmethod
    def whole_segments(cls, value: int) -> int:
        if value % constants.AES_BLOCK_BYTES or value < 2 * constants.AES_BLOCK_BYTES:
            raise ValueError("attack blocks need at least two 16 B segments")
        return value

    @property
    def n_segments(self) -> int:
        return self.block_bytes // constants.AES_BLOCK_BYTES


class SparseTensorSample(BaseModel):
    """Synthetic tensor: each 16 B segment is all-zero with probability zero_fraction, else uniform random."""

    model_config = ConfigDict(frozen=True)

    zero_fraction: float = Field(default=constants.ATTACK_ZERO_FRACTION, ge=0.0, le=1.0)
    blocks_per_trial: PositiveInt = constants.ATTACK_BLOCKS_PER_TRIAL

    @property
    def label(self) -> str:
        return f"sparse_z{self.zero_fraction:g}"


class AttackReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    scheme_label: str
    workload: str
    attack: AttackKind
    attempts: NonNegativeInt
    successes: NonNegativeInt
    recovered_fraction: float = Field(ge=0.0, le=1.0)
    segments_total: NonNegativeInt = 0
    segments_recovered: NonNegativeInt = 0

    @model_validator(mode="after")
    def successes_bounded(self) -> "AttackReport":
        if self.successes > self.attempts:
            raise ValueError("successes exceed attempts")
        if self.segments_recovered > self.segments_total:
            raise ValueError("recovered segments exceed total segments")
        return self


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    profile: NpuProfile = NpuProfile.server
    custom_npu: NpuConfig | None = None
    schemes: list[str] = Field(default_factory=lambda: list(constants.DEFAULT_SCHEMES))
    models: list[str] = Field(default_factory=lambda: list(constants.DEFAULT_MODELS))
    seed: int = constants.DEFAULT_SEED
    out_dir: Path = Path(constants.DEFAULT_OUT_DIR)
    model_dir: Path = Path(constants.MODEL_DIR)
    layer_mac_residency: MacResidency = MacResidency.off_chip
    layer_verify: LayerVerify = LayerVerify.speculative
    dram_latency_ns: float = Field(default=constants.DRAM_ACCESS_LATENCY_NS, gt=0)
    attack_trials: PositiveInt = constants.ATTACK_TRIALS
    attack_blocks_per_trial: PositiveInt = constants.ATTACK_BLOCKS_PER_TRIAL
    attack_zero_fraction: float = Field(default=constants.ATTACK_ZERO_FRACTION, ge=0.0, le=1.0)
    workers: PositiveInt = 1

    @field_validator("schemes", "models")
    @classmethod
    def non_empty(cls, value: list[str]) -> list[str]:
        value = [v.strip() for v in value if v.strip()]
        if not value:
            raise ValueError("list must not be empty")
        return value

    @model_validator(mode="after")
    def custom_profile_has_npu(self) -> "ExperimentSpec":
        if self.profile is NpuProfile.custom and self.custom_npu is None:
            raise ValueError("custom profile needs NPU_* settings")
        return self

    def npu(self) -> NpuConfig:
        if self.custom_npu is not None:
            return self.custom_npu
        return NpuConfig.from_profile(self.profile.value)


def _split_list(value):
    if isinstance(value, str):
        return [item for item in value.split(",") if item.strip()]
    return value


class ExperimentConfigFile(BaseModel):
    """Key/value experiment file; sections are key prefixes. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    profile: NpuProfile | None = Field(default=None, alias="EXPERIMENT_PROFILE")
    schemes: list[str] | None = Field(default=None, alias="EXPERIMENT_SCHEMES")
    models: list[str] | None = Field(default=None, alias="EXPERIMENT_MODELS")
    seed: int | None = Field(default=None, alias="EXPERIMENT_SEED")
    out_dir: Path | None = Field(default=None, alias="EXPERIMENT_OUT_DIR")
    model_dir: Path | None = Field(default=None, alias="EXPERIMENT_MODEL_DIR")

    pe_rows: PositiveInt | None = Field(default=None, alias="NPU_PE_ROWS")
    pe_cols: PositiveInt | None = Field(default=None, alias="NPU_PE_COLS")
    sram_bytes: PositiveInt | None = Field(default=None, alias="NPU_SRAM_BYTES")
    freq_ghz: float | None = Field(default=None, gt=0, alias="NPU_FREQ_GHZ")
    dram_channels: PositiveInt | None = Field(default=None, alias="NPU_DRAM_CHANNELS")
    dram_gbps_per_channel: float | None = Field(default=None, gt=0, alias="NPU_DRAM_GBPS_PER_CHANNEL")
    element_bytes: PositiveInt | None = Field(default=None, alias="NPU_ELEMENT_BYTES")

    dram_latency_ns: float | None = Field(default=None, gt=0, alias="DRAM_ACCESS_LATENCY_NS")

    layer_mac_residency: MacResidency | None = Field(default=None, alias="SEDA_LAYER_MAC_RESIDENCY")
    layer_verify: LayerVerify | None = Field(default=None, alias="SEDA_LAYER_VERIFY")

    attack_trials: PositiveInt | None = Field(default=None, alias="ATTACK_TRIALS")
    attack_blocks_per_trial: PositiveInt | None = Field(default=None, alias="ATTACK_BLOCKS_PER_TRIAL")
    attack_zero_fraction: float | None = Field(default=None, ge=0.0, le=1.0, alias="ATTACK_ZERO_FRACTION")

    workers: PositiveInt | None = Field(default=None, alias="RUN_WORKERS")

    @field_validator("schemes", "models", mode="before")
    @classmethod
    def comma_separated(cls, value):
        return _split_list(value)

    def npu_fields(self) -> dict:
        return {
            name: getattr(self, name)
            for name in ("pe_rows", "pe_cols", "sram_bytes", "freq_ghz", "dram_channels", "dram_gbps_per_channel", "element_bytes")
            if getattr(self, name) is not None
        }

    def to_spec(self, overrides: dict | None = None) -> ExperimentSpec:
        """Merge file values under CLI overrides (None means not given) into a validated spec."""
        values = {
            name: value
            for name, value in self.model_dump(exclude_none=True).items()
            if name in ExperimentSpec.model_fields
        }
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        npu_fields = self.npu_fields()
        if npu_fields:
            profile = values.get("profile", NpuProfile.server)
            if NpuProfile(profile) is NpuProfile.custom:
                values["custom_npu"] = NpuConfig(name="custom", **npu_fields)
            else:
                base = constants.NPU_PROFILES[NpuProfile(profile).value]
                values["custom_npu"] = NpuConfig(name=NpuProfile(profile).value, **{**base, **npu_fields})
        return ExperimentSpec(**values)
