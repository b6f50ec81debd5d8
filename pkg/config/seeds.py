"""
Sub-seed derivation: every random role in a run gets its own seed derived
from the master seed and a role tag, so adding a role never shifts another.
"""

import hashlib

_SEED_MASK = (1 << 63) - 1


def derive_seed(master_seed: int, tag: str) -> int:
    """First 8 bytes of SHA-256("{master}/{tag}"), big-endian, masked to 63 bits."""
    digest = hashlib.sha256(f"{master_seed}/{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _SEED_MASK
