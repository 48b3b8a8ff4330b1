"""Block MACs and the optBlk / layer / model XOR-fold hierarchy.

Block MACs are AES-CMAC (a CBC-MAC chain over the AES primitive) under K_h,
computed over the zero-padded message and truncated to 64 bits.
"""
import logging
from typing import Iterable

from Crypto.Cipher import AES
from Crypto.Hash import CMAC

import constants
from model.crypto_model import (
    BlockPosition,
    CounterBlock,
    LayerMacAccumulator,
    MacKey,
    MacTag,
    ModelMacAccumulator,
    ProtectionBlock,
)
from model.enums import VerifyLevel, VerifyOutcome
from utils.common_utils import align_up
from utils.exceptions import FoldAfterSeal, VerifyBeforeComplete

logger = logging.getLogger(__name__)

TAG_MASK = (1 << 64) - 1


def _keyed_hash(key: MacKey, message: bytes) -> MacTag:
    padded = message.ljust(align_up(len(message), constants.AES_BLOCK_BYTES), b"\x00")
    digest = CMAC.new(key.key, msg=padded, ciphermod=AES).digest()
    return MacTag(tag=int.from_bytes(digest[:constants.MAC_BYTES], "big"))


def mac_message(cipher_blk: ProtectionBlock, ctr: CounterBlock, pos: BlockPosition) -> bytes:
    """blk || PA || VN || layer_id || fmap_idx || blk_idx, before padding."""
    return cipher_blk.payload + ctr.serialize() + pos.serialize()


def compute_block_mac(
    key: MacKey,
    cipher_blk: ProtectionBlock,
    ctr: CounterBlock,
    pos: BlockPosition,
) -> MacTag:
    return _keyed_hash(key, mac_message(cipher_blk, ctr, pos))


def naive_block_mac(key: MacKey, cipher_blk: ProtectionBlock) -> MacTag:
    # ciphertext only: the layer fold over these tags ignores block order
    return _keyed_hash(key, cipher_blk.payload)


def fold_layer_mac(acc: LayerMacAccumulator, tag: MacTag) -> LayerMacAccumulator:
    return acc.model_copy(update={"folded": acc.folded ^ tag.tag, "count": acc.count + 1})


def layer_mac(layer_id: int, tags: Iterable[MacTag]) -> LayerMacAccumulator:
    tags = list(tags)
    acc = LayerMacAccumulator(layer_id=layer_id, expected_count=len(tags))
    for tag in tags:
        acc = fold_layer_mac(acc, tag)
    return acc


def fold_model_mac(acc: ModelMacAccumulator, layer_mac_value: int) -> ModelMacAccumulator:
    if acc.sealed:
        raise FoldAfterSeal("model MAC is sealed")
    return acc.model_copy(
        update={"folded": acc.folded ^ (layer_mac_value & TAG_MASK), "layer_count": acc.layer_count + 1}
    )


def seal_model_mac(acc: ModelMacAccumulator) -> ModelMacAccumulator:
    return acc.model_copy(update={"sealed": True})


def verify(
    level: VerifyLevel,
    expected: int | MacTag,
    actual: int | MacTag | LayerMacAccumulator | ModelMacAccumulator,
) -> VerifyOutcome:
    if isinstance(actual, LayerMacAccumulator):
        if level is not VerifyLevel.layer:
            raise ValueError(f"layer accumulator verified at {level.value} level")
        if not actual.complete:
            raise VerifyBeforeComplete(
                f"layer {actual.layer_id}: {actual.count} of {actual.expected_count} tags folded"
            )
        actual_value = actual.folded
    elif isinstance(actual, ModelMacAccumulator):
        if level is not VerifyLevel.model:
            raise ValueError(f"model accumulator verified at {level.value} level")
        if not actual.sealed:
            raise VerifyBeforeComplete("model MAC is not sealed")
        actual_value = actual.folded
    elif isinstance(actual, MacTag):
        actual_value = actual.tag
    else:
        actual_value = actual
    expected_value = expected.tag if isinstance(expected, MacTag) else expected

    outcome = VerifyOutcome.passed if expected_value == actual_value else VerifyOutcome.failed
    if outcome is VerifyOutcome.failed:
        logger.debug("%s verification failed", level.value)
    return outcome
