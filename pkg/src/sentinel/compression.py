"""One-way compression primitives used as leaves and internal nodes.

Three algorithms are supported: SHA-256 and SHA3-256 (32-byte digests) and
unkeyed BLAKE2b (64-byte digests, required by the lattice construction).
`sequential_hash` is the whole-input CPU oracle that parallel constructions
are compared against.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Union

_STREAM_CHUNK = 1 << 20


class CompressionAlg(enum.Enum):
    SHA256 = "sha256"
    BLAKE2B = "blake2b"
    SHA3_256 = "sha3-256"

    @property
    def digest_len(self) -> int:
        return _DIGEST_LEN[self]

    def new_hasher(self):
        return _FACTORY[self]()

    @classmethod
    def from_name(cls, name: str) -> "CompressionAlg":
        for alg in cls:
            if alg.value == name:
                return alg
        raise ValueError(f"unknown compression algorithm: {name!r}")


_DIGEST_LEN = {
    CompressionAlg.SHA256: 32,
    CompressionAlg.BLAKE2B: 64,
    CompressionAlg.SHA3_256: 32,
}

_FACTORY = {
    CompressionAlg.SHA256: hashlib.sha256,
    CompressionAlg.BLAKE2B: hashlib.blake2b,
    CompressionAlg.SHA3_256: hashlib.sha3_256,
}


@dataclass(frozen=True)
class Digest:
    """A compression-function output tagged with its algorithm."""

    alg: CompressionAlg
    data: bytes

    def __post_init__(self):
        if len(self.data) != self.alg.digest_len:
            raise ValueError(
                f"{self.alg.value} digest must be {self.alg.digest_len} bytes, "
                f"got {len(self.data)}"
            )

    def hex(self) -> str:
        return self.data.hex()


def compress_block(alg: CompressionAlg, data: Union[bytes, bytearray, memoryview]) -> Digest:
    """Hash a single block. Total, deterministic, empty input allowed."""
    h = alg.new_hasher()
    h.update(data)
    return Digest(alg, h.digest())


def sequential_hash(alg: CompressionAlg, stream: Union[BinaryIO, Iterable[bytes]]) -> Digest:
    """Hash a whole byte stream sequentially.

    Accepts a readable binary file object or an iterable of byte chunks.
    Equals compress_block over the concatenated stream; serves as the
    sequential baseline for parallel-construction comparisons.
    """
    h = alg.new_hasher()
    if hasattr(stream, "read"):
        while True:
            chunk = stream.read(_STREAM_CHUNK)
            if not chunk:
                break
            h.update(chunk)
    else:
        for chunk in stream:
            h.update(chunk)
    return Digest(alg, h.digest())
