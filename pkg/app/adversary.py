"""Executable SECA and RePA attacks, run as regression campaigns against the defenses."""
import logging
from collections import Counter

import numpy as np

import constants
from app.cipher_core import PadGenerator
from app.integrity import compute_block_mac, layer_mac, naive_block_mac, verify
from model.crypto_model import BlockPosition, CounterBlock, KeySet, MacTag, ProtectionBlock
from model.enums import AttackKind, MacMode, PadMode, VerifyLevel, VerifyOutcome
from model.experiment_model import AttackReport, AttackTarget, SparseTensorSample, StoredBlock
from utils.common_utils import xor_bytes
from utils.exceptions import DegenerateLayer

logger = logging.getLogger(__name__)

ZERO_SEGMENT = bytes(constants.AES_BLOCK_BYTES)


def calc_freq_value(cipher_blk: ProtectionBlock) -> bytes:
    """Most frequent ciphertext segment; ties go to the lowest segment index."""
    segments = cipher_blk.segments()
    counts = Counter(segments)
    first_seen: dict[bytes, int] = {}
    for index, segment in enumerate(segments):
        first_seen.setdefault(segment, index)
    return max(counts, key=lambda seg: (counts[seg], -first_seen[seg]))


def seca_attack(cipher_blk: ProtectionBlock, assumed_most_plaintext: bytes = ZERO_SEGMENT) -> ProtectionBlock:
    if cipher_blk.n_segments < 2:
        raise ValueError("SECA needs a block of at least two segments")
    otp = xor_bytes(calc_freq_value(cipher_blk), assumed_most_plaintext)
    return ProtectionBlock.from_segments([xor_bytes(segment, otp) for segment in cipher_blk.segments()])


def recovered_segments(recovered: ProtectionBlock, plaintext: ProtectionBlock) -> int:
    return sum(1 for got, want in zip(recovered.segments(), plaintext.segments()) if got == want)


def _slot_mac(keys: KeySet, content: ProtectionBlock, slot: StoredBlock, mac_mode: MacMode) -> MacTag:
    if mac_mode is MacMode.naive:
        return naive_block_mac(keys.mac, content)
    return compute_block_mac(keys.mac, content, slot.ctr, slot.pos)


def non_identity_permutation(n: int, rng: np.random.Generator) -> list[int]:
    identity = list(range(n))
    while True:
        perm = [int(i) for i in rng.permutation(n)]
        if perm != identity:
            return perm


def repa_attack(
    layer_blocks: list[StoredBlock],
    mac_mode: MacMode,
    seed: int,
    keys: KeySet,
    pad_mode: PadMode = PadMode.pad_group,
    pad_generator: PadGenerator | None = None,
) -> tuple[bool, bool]:
    """Shuffle ciphertexts between the slots of one layer; report (verification_passed, decryption_corrupted)."""
    if len(layer_blocks) < 2:
        raise DegenerateLayer(f"RePA needs at least 2 blocks, got {len(layer_blocks)}")
    layer_id = layer_blocks[0].pos.layer_id
    sum_mac = layer_mac(layer_id, (_slot_mac(keys, s.cipher, s, mac_mode) for s in layer_blocks))

    perm = non_identity_permutation(len(layer_blocks), np.random.default_rng(seed))
    shuffled = [layer_blocks[src].cipher for src in perm]
    sum_mac_shuffle = layer_mac(
        layer_id,
        (_slot_mac(keys, content, slot, mac_mode) for content, slot in zip(shuffled, layer_blocks)),
    )
    passed = verify(VerifyLevel.layer, sum_mac.folded, sum_mac_shuffle) is VerifyOutcome.passed

    pads = pad_generator or PadGenerator(keys.enc)
    corrupted = False
    for content, slot in zip(shuffled, layer_blocks):
        original = pads.decrypt(slot.cipher, slot.ctr, pad_mode)
        if pads.decrypt(content, slot.ctr, pad_mode) != original:
            corrupted = True
            break
    return passed, corrupted


def sparse_plaintext(rng: np.random.Generator, n_segments: int, zero_fraction: float) -> ProtectionBlock:
    zero_mask = rng.random(n_segments) < zero_fraction
    segments = [ZERO_SEGMENT if is_zero else rng.bytes(constants.AES_BLOCK_BYTES) for is_zero in zero_mask]
    return ProtectionBlock.from_segments(segments)


def _trial_counter(trial: int, block: int, sample: SparseTensorSample, target: AttackTarget) -> CounterBlock:
    pa = (trial * sample.blocks_per_trial + block) * target.block_bytes
    return CounterBlock(pa=pa, vn=trial + 1)


def _seca_trial(
    rng: np.random.Generator,
    trial: int,
    target: AttackTarget,
    sample: SparseTensorSample,
    pads: PadGenerator,
) -> int:
    recovered = 0
    for block in range(sample.blocks_per_trial):
        plaintext = sparse_plaintext(rng, target.n_segments, sample.zero_fraction)
        cipher = pads.encrypt(plaintext, _trial_counter(trial, block, sample, target), target.pad_mode)
        recovered += recovered_segments(seca_attack(cipher, ZERO_SEGMENT), plaintext)
    return recovered


def _repa_trial(
    rng: np.random.Generator,
    trial: int,
    target: AttackTarget,
    sample: SparseTensorSample,
    pads: PadGenerator,
    keys: KeySet,
) -> bool:
    layer = []
    for block in range(max(sample.blocks_per_trial, 2)):
        ctr = _trial_counter(trial, block, sample, target)
        plaintext = sparse_plaintext(rng, target.n_segments, sample.zero_fraction)
        layer.append(
            StoredBlock(
                cipher=pads.encrypt(plaintext, ctr, target.pad_mode),
                ctr=ctr,
                pos=BlockPosition(layer_id=trial % 2 ** 32, fmap_idx=block // 4, blk_idx=block % 4),
            )
        )
    passed, corrupted = repa_attack(
        layer,
        target.mac_mode,
        int(rng.integers(2 ** 63)),
        keys,
        pad_mode=target.pad_mode,
        pad_generator=pads,
    )
    return passed and corrupted


def run_attack_campaign(
    target: AttackTarget,
    sample: SparseTensorSample,
    trials: int,
    seed: int,
    keys: KeySet,
) -> AttackReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pads = PadGenerator(keys.enc)
    successes = 0
    segments_total = 0
    segments_recovered = 0
    for trial in range(trials):
        # one independent stream per trial
        rng = np.random.default_rng([seed, trial])
        if target.attack is AttackKind.seca:
            trial_segments = sample.blocks_per_trial * target.n_segments
            recovered = _seca_trial(rng, trial, target, sample, pads)
            segments_total += trial_segments
            segments_recovered += recovered
            successes += int(2 * recovered >= trial_segments)
        else:
            successes += int(_repa_trial(rng, trial, target, sample, pads, keys))

    if target.attack is AttackKind.seca:
        fraction = segments_recovered / segments_total
    else:
        fraction = successes / trials
    logger.info("Campaign %s on %s: %d/%d successes, fraction %.4f", target.label, sample.label, successes, trials, fraction)
    return AttackReport(
        scheme_label=target.label,
        workload=sample.label,
        attack=target.attack,
        attempts=trials,
        successes=successes,
        recovered_fraction=fraction,
        segments_total=segments_total,
        segments_recovered=segments_recovered,
    )
