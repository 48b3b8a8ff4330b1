"""AES-128 core, AES-CTR one-time pads, bandwidth-aware pad groups and the engine cost model.

All functions are pure; blocks and round keys are 16-byte ``bytes`` values.
"""
import logging
import math

import constants
from model.crypto_model import (
    AesKey,
    CounterBlock,
    EngineCostModel,
    PadGroup,
    ProtectionBlock,
    RoundKeySchedule,
)
from model.enums import AesVariant, PadMode
from model.workload_model import NpuConfig
from utils.common_utils import xor_bytes
from utils.exceptions import PadSizeMismatch, SegmentCountExceedsSchedule

logger = logging.getLogger(__name__)

_RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def _xtime(a: int) -> int:
    a <<= 1
    if a & 0x100:
        a ^= 0x11B
    return a


def _gmul(a: int, b: int) -> int:
    product = 0
    while b:
        if b & 1:
            product ^= a
        a = _xtime(a)
        b >>= 1
    return product


def _rotl8(x: int, shift: int) -> int:
    return ((x << shift) | (x >> (8 - shift))) & 0xFF


def _build_sbox() -> tuple[list[int], list[int]]:
    sbox = [0] * 256
    p = q = 1
    while True:
        # p walks the multiplicative group by powers of 3, q tracks its inverse
        p = p ^ ((p << 1) & 0xFF) ^ (0x1B if p & 0x80 else 0)
        q ^= q << 1
        q ^= q << 2
        q ^= q << 4
        q &= 0xFF
        if q & 0x80:
            q ^= 0x09
        sbox[p] = q ^ _rotl8(q, 1) ^ _rotl8(q, 2) ^ _rotl8(q, 3) ^ _rotl8(q, 4) ^ 0x63
        if p == 1:
            break
    sbox[0] = 0x63
    inv_sbox = [0] * 256
    for i, s in enumerate(sbox):
        inv_sbox[s] = i
    return sbox, inv_sbox


SBOX, INV_SBOX = _build_sbox()
_MUL2 = [_gmul(i, 2) for i in range(256)]
_MUL3 = [_gmul(i, 3) for i in range(256)]
_MUL9 = [_gmul(i, 9) for i in range(256)]
_MUL11 = [_gmul(i, 11) for i in range(256)]
_MUL13 = [_gmul(i, 13) for i in range(256)]
_MUL14 = [_gmul(i, 14) for i in range(256)]

# state is column-major: index = row + 4 * col
_SHIFT_ROWS = [(r + 4 * ((c + r) % 4)) for c in range(4) for r in range(4)]
_INV_SHIFT_ROWS = [(r + 4 * ((c - r) % 4)) for c in range(4) for r in range(4)]


def _add_round_key(state: list[int], round_key: bytes) -> list[int]:
    return [s ^ k for s, k in zip(state, round_key)]


def _mix_columns(s: list[int]) -> list[int]:
    out = [0] * 16
    for c in range(0, 16, 4):
        a0, a1, a2, a3 = s[c], s[c + 1], s[c + 2], s[c + 3]
        out[c] = _MUL2[a0] ^ _MUL3[a1] ^ a2 ^ a3
        out[c + 1] = a0 ^ _MUL2[a1] ^ _MUL3[a2] ^ a3
        out[c + 2] = a0 ^ a1 ^ _MUL2[a2] ^ _MUL3[a3]
        out[c + 3] = _MUL3[a0] ^ a1 ^ a2 ^ _MUL2[a3]
    return out


def _inv_mix_columns(s: list[int]) -> list[int]:
    out = [0] * 16
    for c in range(0, 16, 4):
        a0, a1, a2, a3 = s[c], s[c + 1], s[c + 2], s[c + 3]
        out[c] = _MUL14[a0] ^ _MUL11[a1] ^ _MUL13[a2] ^ _MUL9[a3]
        out[c + 1] = _MUL9[a0] ^ _MUL14[a1] ^ _MUL11[a2] ^ _MUL13[a3]
        out[c + 2] = _MUL13[a0] ^ _MUL9[a1] ^ _MUL14[a2] ^ _MUL11[a3]
        out[c + 3] = _MUL11[a0] ^ _MUL13[a1] ^ _MUL9[a2] ^ _MUL14[a3]
    return out


def expand_key(key: AesKey | bytes) -> RoundKeySchedule:
    raw = key.key if isinstance(key, AesKey) else key
    if len(raw) != constants.AES_BLOCK_BYTES:
        raise ValueError(f"AES-128 key must be {constants.AES_BLOCK_BYTES} bytes")
    words = [list(raw[i:i + 4]) for i in range(0, 16, 4)]
    for i in range(4, 4 * constants.ROUND_KEY_COUNT):
        temp = list(words[i - 1])
        if i % 4 == 0:
            temp = temp[1:] + temp[:1]
            temp = [SBOX[b] for b in temp]
            temp[0] ^= _RCON[i // 4 - 1]
        words.append([w ^ t for w, t in zip(words[i - 4], temp)])
    round_keys = tuple(
        bytes(words[4 * r] + words[4 * r + 1] + words[4 * r + 2] + words[4 * r + 3])
        for r in range(constants.ROUND_KEY_COUNT)
    )
    return RoundKeySchedule(round_keys=round_keys)


def aes_encrypt_block(schedule: RoundKeySchedule, block: bytes) -> bytes:
    if len(block) != constants.AES_BLOCK_BYTES:
        raise ValueError("AES block must be 16 bytes")
    keys = schedule.round_keys
    state = _add_round_key(list(block), keys[0])
    for rnd in range(1, constants.AES_ROUNDS + 1):
        state = [SBOX[b] for b in state]
        state = [state[i] for i in _SHIFT_ROWS]
        if rnd != constants.AES_ROUNDS:
            state = _mix_columns(state)
        state = _add_round_key(state, keys[rnd])
    return bytes(state)


def aes_decrypt_block(schedule: RoundKeySchedule, block: bytes) -> bytes:
    if len(block) != constants.AES_BLOCK_BYTES:
        raise ValueError("AES block must be 16 bytes")
    keys = schedule.round_keys
    state = _add_round_key(list(block), keys[constants.AES_ROUNDS])
    for rnd in range(constants.AES_ROUNDS - 1, -1, -1):
        state = [state[i] for i in _INV_SHIFT_ROWS]
        state = [INV_SBOX[b] for b in state]
        state = _add_round_key(state, keys[rnd])
        if rnd != 0:
            state = _inv_mix_columns(state)
    return bytes(state)


def gen_base_otp(schedule: RoundKeySchedule, ctr: CounterBlock) -> bytes:
    return aes_encrypt_block(schedule, ctr.serialize())


def derive_pad_group(schedule: RoundKeySchedule, base: bytes, n_segments: int) -> PadGroup:
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    if n_segments > constants.ROUND_KEY_COUNT:
        raise SegmentCountExceedsSchedule(
            f"{n_segments} segments requested, schedule holds {constants.ROUND_KEY_COUNT} round keys"
        )
    segments = tuple(xor_bytes(base, schedule.round_keys[i]) for i in range(n_segments))
    return PadGroup(base=base, segments=segments)


def extended_schedule_seed(key: AesKey, ctr: CounterBlock, index: int) -> bytes:
    """Seed of the index-th chained schedule: K_e xor (PA || VN) xor index."""
    return xor_bytes(xor_bytes(key.key, ctr.serialize()), index.to_bytes(constants.AES_BLOCK_BYTES, "big"))


def derive_pad_group_extended(
    key: AesKey,
    ctr: CounterBlock,
    n_segments: int,
    schedule: RoundKeySchedule | None = None,
) -> PadGroup:
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    base = gen_base_otp(schedule or expand_key(key), ctr)
    segments: list[bytes] = []
    index = 0
    while len(segments) < n_segments:
        chained = expand_key(extended_schedule_seed(key, ctr, index))
        take = min(constants.ROUND_KEY_COUNT, n_segments - len(segments))
        segments.extend(xor_bytes(base, chained.round_keys[i]) for i in range(take))
        index += 1
    return PadGroup(base=base, segments=tuple(segments))


def xor_crypt(block: ProtectionBlock, pads: PadGroup) -> ProtectionBlock:
    if len(block.payload) != pads.block_bytes:
        raise PadSizeMismatch(f"block of {len(block.payload)} B vs pad group of {pads.block_bytes} B")
    return ProtectionBlock(payload=xor_bytes(block.payload, b"".join(pads.segments)))


class PadGenerator:
    """Holds K_e and its schedule; hands out the pads of one protection block."""

    def __init__(self, key: AesKey):
        self.key = key
        self.schedule = expand_key(key)

    def pads(self, ctr: CounterBlock, n_segments: int, mode: PadMode = PadMode.pad_group) -> PadGroup:
        base = gen_base_otp(self.schedule, ctr)
        if mode is PadMode.shared_otp:
            return PadGroup(base=base, segments=(base,) * n_segments)
        if n_segments <= constants.ROUND_KEY_COUNT:
            return derive_pad_group(self.schedule, base, n_segments)
        return derive_pad_group_extended(self.key, ctr, n_segments, schedule=self.schedule)

    def encrypt(self, block: ProtectionBlock, ctr: CounterBlock, mode: PadMode = PadMode.pad_group) -> ProtectionBlock:
        return xor_crypt(block, self.pads(ctr, block.n_segments, mode))

    decrypt = encrypt


def engine_cost(
    model: EngineCostModel,
    bandwidth_multiple: int,
    variant: AesVariant,
) -> tuple[float, float]:
    if bandwidth_multiple < 1:
        raise ValueError("bandwidth_multiple must be >= 1")
    if variant is AesVariant.T_AES:
        return (
            bandwidth_multiple * model.aes_area_units,
            bandwidth_multiple * model.aes_power_units,
        )
    extra = bandwidth_multiple - 1
    return (
        model.aes_area_units + extra * model.xor_bank_area_units,
        model.aes_power_units + extra * model.xor_bank_power_units,
    )


def required_bandwidth_multiple(npu: NpuConfig, model: EngineCostModel) -> int:
    """Engines-worth of pad bandwidth needed to keep up with the NPU's DRAM bandwidth."""
    bytes_per_cycle = npu.dram_channels * npu.dram_gbps_per_channel / npu.freq_ghz
    return max(1, math.ceil(bytes_per_cycle / model.pad_bytes_per_cycle))
