import logging
import os

logger = logging.getLogger(__name__)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"xor of {len(a)} B and {len(b)} B operands")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def align_down(value: int, alignment: int) -> int:
    return value - value % alignment


def align_up(value: int, alignment: int) -> int:
    return -(-value // alignment) * alignment


def aligned_span(start: int, end: int, alignment: int) -> int:
    """Bytes of the alignment-sized blocks that [start, end) touches."""
    if end <= start:
        return 0
    return align_up(end, alignment) - align_down(start, alignment)


def get_hex_secret(env_name: str, default_hex: str) -> bytes:
    value = os.getenv(env_name)
    if not value:
        return bytes.fromhex(default_hex)
    try:
        return bytes.fromhex(value.strip())
    except ValueError as e:
        # never echo the value itself
        raise ValueError(f"{env_name} is not a hex string") from e
