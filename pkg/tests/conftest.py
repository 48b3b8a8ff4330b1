from pathlib import Path

import pytest

import constants
from model.crypto_model import AesKey, KeySet, MacKey
from model.workload_model import NpuConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def keys() -> KeySet:
    return KeySet(
        enc=AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX),
        mac=MacKey.from_hex(constants.DEFAULT_MAC_KEY_HEX),
    )


@pytest.fixture
def server_npu() -> NpuConfig:
    return NpuConfig.from_profile("server")


@pytest.fixture
def edge_npu() -> NpuConfig:
    return NpuConfig.from_profile("edge")


@pytest.fixture
def small_npu() -> NpuConfig:
    """Tiny SRAM so that small layers need several tiles."""
    return NpuConfig(
        name="small",
        pe_rows=4,
        pe_cols=4,
        sram_bytes=8 * 1024,
        freq_ghz=1.0,
        dram_channels=4,
        dram_gbps_per_channel=4.0,
    )
