"""Two-stage Merkle construction: parallel block hashing + tree reduction.

Stage one hashes fixed-size data blocks into a flat digest buffer. Stage two
reduces the buffer level by level, pairing neighbours and compressing each
pair, using two preallocated buffers whose input/output roles swap between
levels so no digest is ever copied. An odd level gets an all-zero padding
node before pairing. A single leaf is returned as the root unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .compression import CompressionAlg, Digest, compress_block
from .errors import InvalidInput, InvalidState
from .workers import run_chunked


@dataclass
class DigestBuffer:
    """Contiguous array of same-algorithm digests."""

    alg: CompressionAlg
    data: bytearray
    count: int

    @classmethod
    def allocate(cls, alg: CompressionAlg, capacity: int) -> "DigestBuffer":
        return cls(alg, bytearray(capacity * alg.digest_len), 0)

    @classmethod
    def from_digests(cls, alg: CompressionAlg, digests: Sequence[Digest]) -> "DigestBuffer":
        buf = cls.allocate(alg, len(digests))
        dlen = alg.digest_len
        for i, d in enumerate(digests):
            buf.data[i * dlen : (i + 1) * dlen] = d.data
        buf.count = len(digests)
        return buf

    @property
    def digest_len(self) -> int:
        return self.alg.digest_len

    @property
    def nbytes(self) -> int:
        return len(self.data)

    def entry(self, i: int) -> bytes:
        dlen = self.digest_len
        return bytes(self.data[i * dlen : (i + 1) * dlen])

    def entries(self) -> list:
        return [self.entry(i) for i in range(self.count)]


@dataclass
class ReductionState:
    """Two swapped digest buffers driving a level-by-level tree reduction.

    Each buffer holds ceil(initial_count / 2) entries and is never
    reallocated between levels; only the input/output designation flips.
    """

    buffer_a: DigestBuffer
    buffer_b: DigestBuffer
    active: int = 0  # index of the buffer currently holding the input level

    @classmethod
    def from_leaves(cls, leaves: DigestBuffer) -> "ReductionState":
        # buffer_a aliases the stage-one output (capacity count >= ceil(count/2));
        # only buffer_b is a fresh allocation. After the first swap the leaf
        # storage is reused as the output buffer, mirroring the kernel design.
        cap = max(1, (leaves.count + 1) // 2)
        b = DigestBuffer.allocate(leaves.alg, cap)
        return cls(leaves, b)

    @property
    def input_buffer(self) -> DigestBuffer:
        return self.buffer_a if self.active == 0 else self.buffer_b

    @property
    def output_buffer(self) -> DigestBuffer:
        return self.buffer_b if self.active == 0 else self.buffer_a

    @property
    def aux_bytes(self) -> int:
        # buffer_a is the aliased stage-one buffer, accounted for by its
        # producer; only buffer_b is new storage owned by the reduction.
        return self.buffer_b.nbytes


def hash_blocks(alg: CompressionAlg, blocks: Sequence, workers: int = 1) -> DigestBuffer:
    """Hash an indexed sequence of byte slices into a digest buffer.

    Entry i is always the digest of block i: each worker owns a contiguous
    index range and writes results at fixed offsets, so the buffer is
    byte-identical for any worker count.
    """
    n = len(blocks)
    if n == 0:
        raise InvalidInput("hash_blocks requires at least one block")
    buf = DigestBuffer.allocate(alg, n)
    dlen = alg.digest_len

    def work(start: int, stop: int) -> None:
        for i in range(start, stop):
            h = alg.new_hasher()
            h.update(blocks[i])
            buf.data[i * dlen : (i + 1) * dlen] = h.digest()

    run_chunked(n, workers, work)
    buf.count = n
    return buf


def reduce_level(state: ReductionState, workers: int = 1) -> int:
    """Collapse one tree level: pair neighbours, compress, swap buffers.

    An odd input count gets an all-zero padding node before pairing. Returns
    the new count, ceil(old / 2).
    """
    inp = state.input_buffer
    out = state.output_buffer
    count = inp.count
    if count < 2:
        raise InvalidState("reduce_level requires at least two digests")
    alg = inp.alg
    dlen = inp.digest_len
    padded = count % 2 == 1
    pairs = (count + 1) // 2
    zero = bytes(dlen)

    def work(start: int, stop: int) -> None:
        for j in range(start, stop):
            left = bytes(inp.data[2 * j * dlen : (2 * j + 1) * dlen])
            if padded and j == pairs - 1:
                right = zero
            else:
                right = bytes(inp.data[(2 * j + 1) * dlen : (2 * j + 2) * dlen])
            h = alg.new_hasher()
            h.update(left)
            h.update(right)
            out.data[j * dlen : (j + 1) * dlen] = h.digest()

    run_chunked(pairs, workers, work)
    out.count = pairs
    state.active ^= 1
    return pairs


def merkle_root(alg: CompressionAlg, leaves: DigestBuffer, workers: int = 1) -> Digest:
    """Reduce a leaf buffer to the single root digest.

    A one-leaf buffer yields that leaf unchanged; no extra compression.
    """
    if leaves.count == 0:
        raise InvalidInput("merkle_root requires at least one leaf")
    if leaves.count == 1:
        return Digest(alg, leaves.entry(0))
    state = ReductionState.from_leaves(leaves)
    count = leaves.count
    while count > 1:
        count = reduce_level(state, workers)
    return Digest(alg, state.input_buffer.entry(0))


def merkle_root_of_digests(alg: CompressionAlg, digests: Sequence[Digest],
                           workers: int = 1) -> Digest:
    """Convenience wrapper: build a leaf buffer from digests and reduce it."""
    return merkle_root(alg, DigestBuffer.from_digests(alg, digests), workers)
