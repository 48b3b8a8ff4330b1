import numpy as np
import pytest
from Crypto.Cipher import AES
from hypothesis import given, settings
from hypothesis.strategies import binary, integers

import constants
from app.cipher_core import (
    PadGenerator,
    aes_decrypt_block,
    aes_encrypt_block,
    derive_pad_group,
    derive_pad_group_extended,
    engine_cost,
    expand_key,
    gen_base_otp,
    required_bandwidth_multiple,
    xor_crypt,
)
from utils.common_utils import xor_bytes
from model.crypto_model import AesKey, CounterBlock, EngineCostModel, ProtectionBlock
from model.enums import AesVariant, PadMode
from model.workload_model import NpuConfig
from utils.exceptions import PadSizeMismatch, SegmentCountExceedsSchedule, VersionOverflow
from utils.table_io import read_csv_rows


@pytest.fixture
def aes_vectors(fixtures_dir):
    return [row for _, row in read_csv_rows(fixtures_dir / "aes_vectors.csv", ["key", "plaintext", "ciphertext"])]


class TestAesBlock:
    def test_standard_vectors(self, aes_vectors):
        for row in aes_vectors:
            schedule = expand_key(bytes.fromhex(row["key"]))
            assert aes_encrypt_block(schedule, bytes.fromhex(row["plaintext"])).hex() == row["ciphertext"]

    def test_decrypt_inverts_vectors(self, aes_vectors):
        for row in aes_vectors:
            schedule = expand_key(bytes.fromhex(row["key"]))
            assert aes_decrypt_block(schedule, bytes.fromhex(row["ciphertext"])).hex() == row["plaintext"]

    def test_zero_key_schedule(self):
        round_keys = expand_key(bytes(16)).round_keys
        assert round_keys[0] == bytes(16)
        assert round_keys[1].hex() == "62636363" * 4
        assert round_keys[10].hex() == "b4ef5bcb3e92e21123e951cf6f8f188e"

    def test_last_round_key(self):
        schedule = expand_key(AesKey.from_hex("2b7e151628aed2a6abf7158809cf4f3c"))
        assert len(schedule.round_keys) == constants.ROUND_KEY_COUNT
        assert schedule.round_keys[10].hex() == "d014f9a8c9ee2589e13f0cc8b6630ca6"

    def test_matches_reference_on_random_pairs(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            key, block = rng.bytes(16), rng.bytes(16)
            expected = AES.new(key, AES.MODE_ECB).encrypt(block)
            assert aes_encrypt_block(expand_key(key), block) == expected

    @given(key=binary(min_size=16, max_size=16), block=binary(min_size=16, max_size=16))
    @settings(max_examples=50, deadline=None)
    def test_decrypt_roundtrip(self, key, block):
        schedule = expand_key(key)
        assert aes_decrypt_block(schedule, aes_encrypt_block(schedule, block)) == block

    def test_rejects_short_block(self):
        with pytest.raises(ValueError):
            aes_encrypt_block(expand_key(bytes(16)), bytes(15))


class TestCounterBlock:
    def test_serialize_layout(self):
        ctr = CounterBlock(pa=0x1122, vn=3)
        assert ctr.serialize() == (0x1122).to_bytes(8, "big") + (3).to_bytes(8, "big")

    def test_base_otp_is_aes_of_counter(self):
        key = bytes.fromhex(constants.DEFAULT_ENC_KEY_HEX)
        ctr = CounterBlock(pa=0x4000, vn=9)
        expected = AES.new(key, AES.MODE_ECB).encrypt(ctr.serialize())
        assert gen_base_otp(expand_key(key), ctr) == expected

    def test_bump_until_overflow(self):
        ctr = CounterBlock(pa=0, vn=(1 << constants.VN_BITS) - 2)
        last = ctr.bumped()
        assert last.vn == (1 << constants.VN_BITS) - 1
        with pytest.raises(VersionOverflow):
            last.bumped()

    def test_vn_wider_than_field_rejected(self):
        with pytest.raises(ValueError):
            CounterBlock(pa=0, vn=1 << constants.VN_BITS)


class TestPadGroups:
    def test_segments_are_base_xor_round_keys(self):
        schedule = expand_key(bytes(16))
        base = bytes(range(16))
        group = derive_pad_group(schedule, base, 4)
        assert group.segments[0] == base  # round key 0 of the zero key is zero
        assert len(set(group.segments)) == 4
        assert group.block_bytes == 64

    def test_full_schedule(self):
        group = derive_pad_group(expand_key(bytes(16)), bytes(16), constants.ROUND_KEY_COUNT)
        assert len(group.segments) == constants.ROUND_KEY_COUNT

    def test_too_many_segments(self):
        with pytest.raises(SegmentCountExceedsSchedule):
            derive_pad_group(expand_key(bytes(16)), bytes(16), constants.ROUND_KEY_COUNT + 1)

    def test_zero_segments(self):
        with pytest.raises(ValueError):
            derive_pad_group(expand_key(bytes(16)), bytes(16), 0)

    def test_extended_group_is_distinct(self):
        key = AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX)
        group = derive_pad_group_extended(key, CounterBlock(pa=0x200, vn=1), 32)
        assert len(group.segments) == 32
        assert len(set(group.segments)) == 32

    def test_extended_group_depends_on_counter(self):
        key = AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX)
        a = derive_pad_group_extended(key, CounterBlock(pa=0x200, vn=1), 16)
        b = derive_pad_group_extended(key, CounterBlock(pa=0x200, vn=2), 16)
        assert not set(a.segments) & set(b.segments)

    @pytest.mark.parametrize("n_segments", range(1, constants.ROUND_KEY_COUNT + 1))
    def test_extended_prefix_matches_single_schedule(self, n_segments):
        key = AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX)
        ctr = CounterBlock(pa=0x1240, vn=9)
        base = gen_base_otp(expand_key(key), ctr)
        chained = expand_key(xor_bytes(key.key, ctr.serialize()))
        extended = derive_pad_group_extended(key, ctr, n_segments)
        assert extended.base == base
        assert extended.segments == derive_pad_group(chained, base, n_segments).segments
        assert extended.segments == derive_pad_group_extended(key, ctr, 32).segments[:n_segments]

    def test_extended_groups_never_collide_across_counters(self):
        key = AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX)
        schedule = expand_key(key)
        rng = np.random.default_rng(2024)
        counters = {(int(pa) * 64, int(vn)) for pa, vn in rng.integers(1, 2 ** 40, size=(10_000, 2))}
        seen: set[bytes] = set()
        total = 0
        for pa, vn in counters:
            group = derive_pad_group_extended(key, CounterBlock(pa=pa, vn=vn), 16, schedule)
            seen.update(group.segments)
            total += len(group.segments)
        assert len(seen) == total

    def test_shared_mode_repeats_base(self):
        pads = PadGenerator(AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX))
        group = pads.pads(CounterBlock(pa=0, vn=1), 4, PadMode.shared_otp)
        assert set(group.segments) == {group.base}


class TestXorCrypt:
    def test_roundtrip_many_blocks(self):
        rng = np.random.default_rng(7)
        pads = PadGenerator(AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX))
        for i in range(10_000):
            block = ProtectionBlock(payload=rng.bytes(64))
            group = pads.pads(CounterBlock(pa=i * 64, vn=1), block.n_segments)
            assert xor_crypt(xor_crypt(block, group), group) == block

    @given(payload=integers(1, 32).flatmap(lambda n: binary(min_size=16 * n, max_size=16 * n)), vn=integers(0, 2 ** 40))
    @settings(max_examples=40, deadline=None)
    def test_generator_decrypts_what_it_encrypts(self, payload, vn):
        pads = PadGenerator(AesKey.from_hex(constants.DEFAULT_ENC_KEY_HEX))
        ctr = CounterBlock(pa=0x1000, vn=vn)
        block = ProtectionBlock(payload=payload)
        for mode in PadMode:
            assert pads.decrypt(pads.encrypt(block, ctr, mode), ctr, mode) == block

    def test_size_mismatch(self):
        group = derive_pad_group(expand_key(bytes(16)), bytes(16), 2)
        with pytest.raises(PadSizeMismatch):
            xor_crypt(ProtectionBlock(payload=bytes(64)), group)


class TestEngineCost:
    @pytest.mark.parametrize("multiple", [1, 2, 4, 8, 16])
    def test_t_aes_is_linear(self, multiple):
        model = EngineCostModel()
        area, power = engine_cost(model, multiple, AesVariant.T_AES)
        assert area == multiple * engine_cost(model, 1, AesVariant.T_AES)[0]
        assert power == multiple * engine_cost(model, 1, AesVariant.T_AES)[1]

    @pytest.mark.parametrize("multiple", [2, 4, 8, 16])
    def test_b_aes_cheaper_when_scaled(self, multiple):
        model = EngineCostModel()
        b_area, b_power = engine_cost(model, multiple, AesVariant.B_AES)
        t_area, t_power = engine_cost(model, multiple, AesVariant.T_AES)
        assert b_area < t_area
        assert b_power < t_power

    def test_single_engine_costs_equal(self):
        model = EngineCostModel()
        assert engine_cost(model, 1, AesVariant.B_AES) == engine_cost(model, 1, AesVariant.T_AES)

    def test_invalid_multiple(self):
        with pytest.raises(ValueError):
            engine_cost(EngineCostModel(), 0, AesVariant.B_AES)

    def test_required_multiple_per_profile(self):
        model = EngineCostModel()
        # 20 B/cycle and ~3.6 B/cycle against 16/11 B/cycle per engine
        assert required_bandwidth_multiple(NpuConfig.from_profile("server"), model) == 14
        assert required_bandwidth_multiple(NpuConfig.from_profile("edge"), model) == 3

    def test_engine_rate_follows_latency(self):
        slow = EngineCostModel(aes_latency_cycles=22)
        assert slow.pad_bytes_per_cycle == pytest.approx(16 / 22)
        assert required_bandwidth_multiple(NpuConfig.from_profile("server"), slow) == 28
        fixed = EngineCostModel(aes_latency_cycles=22, aes_throughput_bytes_per_cycle=16.0)
        assert required_bandwidth_multiple(NpuConfig.from_profile("server"), fixed) == 2
