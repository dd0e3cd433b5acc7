"""Order-invariant lattice hashing (LtHash) over BLAKE2b block digests.

A lattice digest is 64 bytes viewed as 8 little-endian 64-bit words, each
word holding four packed 16-bit partitions (32 partitions total). Digests
combine by per-partition addition mod 2^16: two digests are added per word
by masking the odd and even partitions separately, adding, masking off the
inter-partition carries, and OR-ing the halves back together. Because the
combine is associative and commutative, block digests may be accumulated in
any order; each block is therefore tagged with its index before hashing so
that reordering the underlying data still changes the result.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DIGEST_BYTES = 64
WORDS = 8
PARTITIONS = 32
PARTITION_BITS = 16
PARTITION_MOD = 1 << PARTITION_BITS

# Even partitions occupy bits 0-15 and 32-47 of each word, odd partitions
# bits 16-31 and 48-63. Masking after addition discards carries between
# partitions (and off the top of the word).
_EVEN_MASK = 0x0000FFFF0000FFFF
_ODD_MASK = 0xFFFF0000FFFF0000

_WORD_STRUCT = struct.Struct("<8Q")


@dataclass(frozen=True)
class LatticeDigest:
    """64-byte carrier of LtHash state: 8 x 64-bit words, 32 x 16-bit lanes."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != DIGEST_BYTES:
            raise ValueError(f"lattice digest must be {DIGEST_BYTES} bytes, got {len(self.data)}")

    def words(self) -> tuple:
        return _WORD_STRUCT.unpack(self.data)

    def partitions(self) -> tuple:
        return struct.unpack("<32H", self.data)

    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def from_hex(cls, s: str) -> "LatticeDigest":
        return cls(bytes.fromhex(s))


_ZERO = LatticeDigest(bytes(DIGEST_BYTES))


def lt_zero() -> LatticeDigest:
    """Additive identity: all 32 partitions zero."""
    return _ZERO


def lt_add(a: LatticeDigest, b: LatticeDigest) -> LatticeDigest:
    """Per-partition addition mod 2^16 via the masked odd/even word scheme."""
    out = bytearray(DIGEST_BYTES)
    wa = _WORD_STRUCT.unpack(a.data)
    wb = _WORD_STRUCT.unpack(b.data)
    _WORD_STRUCT.pack_into(
        out, 0,
        *(
            (((x & _EVEN_MASK) + (y & _EVEN_MASK)) & _EVEN_MASK)
            | (((x & _ODD_MASK) + (y & _ODD_MASK)) & _ODD_MASK)
            for x, y in zip(wa, wb)
        ),
    )
    return LatticeDigest(bytes(out))


def lt_sub(a: LatticeDigest, b: LatticeDigest) -> LatticeDigest:
    """Per-partition subtraction mod 2^16; inverts lt_add."""
    pa = a.partitions()
    pb = b.partitions()
    return LatticeDigest(struct.pack("<32H", *((x - y) % PARTITION_MOD for x, y in zip(pa, pb))))


def lt_hash_block(index: int, data) -> LatticeDigest:
    """BLAKE2b over LE64(index) || data, reinterpreted as a lattice digest."""
    return lt_hash_tagged(struct.pack("<Q", index), data)


def lt_hash_tagged(tag: bytes, data) -> LatticeDigest:
    """BLAKE2b over an arbitrary index tag followed by the block bytes."""
    h = hashlib.blake2b(tag)
    h.update(data)
    return LatticeDigest(h.digest())


def lt_reduce(digests: Iterable[LatticeDigest]) -> LatticeDigest:
    """Sum a collection of lattice digests; empty input yields lt_zero().

    The result is independent of summation order and grouping. Large inputs
    are summed vectorized over the 16-bit lanes; this is arithmetically
    identical to folding with lt_add.
    """
    digests = list(digests)
    if not digests:
        return lt_zero()
    if len(digests) == 1:
        return digests[0]
    raw = b"".join(d.data for d in digests)
    lanes = np.frombuffer(raw, dtype="<u2").reshape(len(digests), PARTITIONS)
    summed = lanes.sum(axis=0, dtype=np.uint64) % PARTITION_MOD
    return LatticeDigest(summed.astype("<u2").tobytes())


def lt_reduce_pairwise(digests: Sequence[LatticeDigest]) -> LatticeDigest:
    """Binary-tree reduction using lt_add; equals lt_reduce by associativity."""
    if not digests:
        return lt_zero()
    level = list(digests)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(lt_add(level[i], level[i + 1]))
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return level[0]
