"""Whole-model and per-layer digests over fragmented tensor collections.

A model is an ordered map of independently allocated tensor buffers. Three
strategies turn it into a digest:

* coalesced — copy every tensor into one contiguous buffer, zero-pad to a
  block-size multiple, hash the blocks;
* per-layer — hash each tensor to its own layer digest, then reduce the
  layer digests (tree for Merkle, modular sum for lattice), returning both
  granularities;
* in-place — build a block table over the fragmented tensors and hash each
  block where it lies, with no copy and no padding (final tensor blocks are
  hashed at their true, shorter length).

The lattice per-layer strategy additionally supports a size-ordered
schedule that accumulates layer digests into a running sum smallest-first;
order invariance guarantees the result is byte-identical to the unordered
schedule.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .compression import CompressionAlg, Digest, compress_block
from .errors import ConfigError, FormatError, InvalidInput
from .lattice import (
    DIGEST_BYTES as LT_DIGEST_BYTES,
    LatticeDigest,
    lt_hash_block,
    lt_hash_tagged,
    lt_add,
    lt_reduce,
    lt_zero,
)
from .merkle import DigestBuffer, hash_blocks, merkle_root, merkle_root_of_digests
from .workers import run_chunked, run_tasks

DEFAULT_BLOCK_SIZE = 8192

# Format constant recorded in attestation predicates: lattice blocks are
# tagged with a little-endian 64-bit prefix — the global block counter for
# coalesced/in-place, and LE64(layer)||LE64(block) for per-layer.
INDEX_ENCODING = "le64-prefix-v1"


class Construction(enum.Enum):
    MERKLE = "merkle"
    LATTICE = "lattice"


class Strategy(enum.Enum):
    COALESCED = "coalesced"
    PER_LAYER = "per-layer"
    IN_PLACE = "in-place"


@dataclass
class TensorMap:
    """Ordered, named, independently allocated byte buffers."""

    entries: List[Tuple[str, bytes]]

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        if len(set(names)) != len(names):
            raise InvalidInput("layer names must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total_bytes(self) -> int:
        return sum(len(buf) for _, buf in self.entries)

    def names(self) -> List[str]:
        return [name for name, _ in self.entries]


@dataclass
class HashConfig:
    construction: Construction
    strategy: Strategy
    alg: CompressionAlg = CompressionAlg.SHA256
    block_size: int = DEFAULT_BLOCK_SIZE
    ordered_per_layer: bool = False

    def validate(self) -> None:
        if self.block_size < 64 or self.block_size & (self.block_size - 1):
            raise ConfigError("block_size must be a power of two >= 64")
        if self.construction is Construction.LATTICE and self.alg is not CompressionAlg.BLAKE2B:
            raise ConfigError("lattice hashing is fixed to BLAKE2b")
        if self.ordered_per_layer and (
            self.construction is not Construction.LATTICE
            or self.strategy is not Strategy.PER_LAYER
        ):
            raise ConfigError("ordered_per_layer requires lattice per-layer hashing")

    def predicate(self) -> Dict[str, object]:
        """The hashing parameters a verifier needs to replay this config."""
        return {
            "construction": self.construction.value,
            "compression": self.alg.value,
            "strategy": self.strategy.value,
            "block_size": self.block_size,
            "ordered_per_layer": self.ordered_per_layer,
            "index_encoding": INDEX_ENCODING,
        }

    @classmethod
    def from_predicate(cls, pred: Dict[str, object]) -> "HashConfig":
        try:
            cfg = cls(
                construction=Construction(pred["construction"]),
                strategy=Strategy(pred["strategy"]),
                alg=CompressionAlg.from_name(pred["compression"]),
                block_size=int(pred["block_size"]),
                ordered_per_layer=bool(pred.get("ordered_per_layer", False)),
            )
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad hashing predicate: {exc}") from exc
        cfg.validate()
        return cfg


@dataclass
class BlockTable:
    """Per-block descriptors over fragmented tensors; drives in-place hashing."""

    rows: List[Tuple[int, int, int, int]]  # (global_index, tensor_index, offset, length)

    @classmethod
    def build(cls, model: TensorMap, block_size: int) -> "BlockTable":
        rows = []
        k = 0
        for t, (_, buf) in enumerate(model.entries):
            size = len(buf)
            for off in range(0, size, block_size):
                rows.append((k, t, off, min(block_size, size - off)))
                k += 1
        return cls(rows)


@dataclass
class ModelDigestResult:
    model_digest: Union[Digest, LatticeDigest]
    config: HashConfig
    block_count: int
    layer_digests: Optional[Dict[str, Union[Digest, LatticeDigest]]] = None
    aux_data_bytes: int = 0    # copy buffers (coalesced staging)
    aux_digest_bytes: int = 0  # digest + reduction buffer storage

    @property
    def aux_bytes(self) -> int:
        return self.aux_data_bytes + self.aux_digest_bytes

    def digest_hex(self) -> str:
        return self.model_digest.hex()


def _require_nonempty(model: TensorMap) -> None:
    if len(model) == 0 or model.total_bytes == 0:
        raise InvalidInput("model must contain at least one byte of tensor data")


def _tensor_blocks(buf, block_size: int, pad_last: bool) -> List:
    """Slice one tensor into blocks; optionally zero-pad the final block."""
    view = memoryview(buf)
    blocks = []
    for off in range(0, len(buf), block_size):
        chunk = view[off : off + block_size]
        if pad_last and len(chunk) < block_size:
            chunk = bytes(chunk) + bytes(block_size - len(chunk))
        blocks.append(chunk)
    return blocks


def _lattice_sum_blocks(blocks: Sequence, tags: Sequence[bytes], workers: int) -> LatticeDigest:
    """Hash tagged blocks and sum them; chunk partial sums merge commutatively."""
    n = len(blocks)
    if n == 0:
        return lt_zero()

    def work(start: int, stop: int) -> LatticeDigest:
        return lt_reduce(lt_hash_tagged(tags[i], blocks[i]) for i in range(start, stop))

    partials = run_chunked(n, workers, work)
    return lt_reduce(partials)


def _merkle_reduce_aux(leaf_count: int, digest_len: int) -> int:
    # leaf buffer plus the one fresh swap buffer the reduction allocates
    if leaf_count <= 1:
        return leaf_count * digest_len
    return leaf_count * digest_len + ((leaf_count + 1) // 2) * digest_len


def coalesce_hash(cfg: HashConfig, model: TensorMap, workers: int = 1) -> ModelDigestResult:
    """Copy tensors into one padded contiguous buffer and hash its blocks."""
    _require_nonempty(model)
    bs = cfg.block_size
    total = model.total_bytes
    padded = ((total + bs - 1) // bs) * bs
    buffer = bytearray(padded)
    pos = 0
    for _, buf in model.entries:
        buffer[pos : pos + len(buf)] = buf
        pos += len(buf)
    view = memoryview(buffer)
    blocks = [view[off : off + bs] for off in range(0, padded, bs)]

    if cfg.construction is Construction.MERKLE:
        leaves = hash_blocks(cfg.alg, blocks, workers)
        root = merkle_root(cfg.alg, leaves, workers)
        aux_digest = _merkle_reduce_aux(len(blocks), cfg.alg.digest_len)
        return ModelDigestResult(root, cfg, len(blocks),
                                 aux_data_bytes=padded, aux_digest_bytes=aux_digest)

    tags = [struct.pack("<Q", k) for k in range(len(blocks))]
    digest = _lattice_sum_blocks(blocks, tags, workers)
    return ModelDigestResult(digest, cfg, len(blocks),
                             aux_data_bytes=padded,
                             aux_digest_bytes=len(blocks) * LT_DIGEST_BYTES)


def per_layer_hash(cfg: HashConfig, model: TensorMap, workers: int = 1) -> ModelDigestResult:
    """Hash each tensor to a layer digest, then reduce layers to a model digest.

    Merkle: each tensor's final block is zero-padded to the block size and
    the layer digests form the leaves of a second tree, in entry order.
    Lattice: blocks are unpadded and tagged LE64(layer)||LE64(block); the
    model digest is the modular sum of layer digests.
    """
    _require_nonempty(model)
    bs = cfg.block_size
    n_layers = len(model)
    block_counts = [max(1, (len(buf) + bs - 1) // bs) if len(buf) else 0
                    for _, buf in model.entries]

    if cfg.construction is Construction.MERKLE:
        def layer_task(i: int):
            _, buf = model.entries[i]
            if len(buf) == 0:
                return compress_block(cfg.alg, b"")
            blocks = _tensor_blocks(buf, bs, pad_last=True)
            return merkle_root(cfg.alg, hash_blocks(cfg.alg, blocks))

        layer_list = run_tasks([lambda i=i: layer_task(i) for i in range(n_layers)], workers)
        model_digest = merkle_root_of_digests(cfg.alg, layer_list, workers)
        aux_digest = sum(_merkle_reduce_aux(c, cfg.alg.digest_len) for c in block_counts)
        aux_digest += _merkle_reduce_aux(n_layers, cfg.alg.digest_len)
    else:
        def layer_task(i: int):
            _, buf = model.entries[i]
            if len(buf) == 0:
                return lt_zero()
            blocks = _tensor_blocks(buf, bs, pad_last=False)
            tags = [struct.pack("<QQ", i, j) for j in range(len(blocks))]
            return _lattice_sum_blocks(blocks, tags, 1)

        if cfg.ordered_per_layer:
            # Schedule layer reductions smallest-first (stable on ties) and
            # fold each completed digest into a running sum; order
            # invariance makes this identical to the entry-order result.
            order = sorted(range(n_layers), key=lambda i: len(model.entries[i][1]))
            layer_list: List[Optional[LatticeDigest]] = [None] * n_layers
            running = lt_zero()
            for digest, i in zip(run_tasks([lambda i=i: layer_task(i) for i in order], workers),
                                 order):
                layer_list[i] = digest
                running = lt_add(running, digest)
            model_digest = running
        else:
            layer_list = run_tasks([lambda i=i: layer_task(i) for i in range(n_layers)], workers)
            model_digest = lt_reduce(layer_list)
        aux_digest = sum(c * LT_DIGEST_BYTES for c in block_counts)
        aux_digest += n_layers * LT_DIGEST_BYTES

    layer_digests = {name: layer_list[i] for i, (name, _) in enumerate(model.entries)}
    return ModelDigestResult(model_digest, cfg, sum(block_counts),
                             layer_digests=layer_digests, aux_digest_bytes=aux_digest)


def ordered_lattice_per_layer(cfg: HashConfig, model: TensorMap,
                              workers: int = 1) -> ModelDigestResult:
    """Size-ordered lattice per-layer hashing; equals the unordered result."""
    if (cfg.construction is not Construction.LATTICE
            or cfg.strategy is not Strategy.PER_LAYER or not cfg.ordered_per_layer):
        raise ConfigError("ordered_lattice_per_layer requires lattice per-layer ordered config")
    return per_layer_hash(cfg, model, workers)


def inplace_hash(cfg: HashConfig, model: TensorMap, workers: int = 1) -> ModelDigestResult:
    """Hash fragmented tensors via a block table, with no copies or padding."""
    _require_nonempty(model)
    table = BlockTable.build(model, cfg.block_size)
    views = [memoryview(buf) for _, buf in model.entries]
    blocks = [views[t][off : off + length] for _, t, off, length in table.rows]

    if cfg.construction is Construction.MERKLE:
        leaves = hash_blocks(cfg.alg, blocks, workers)
        root = merkle_root(cfg.alg, leaves, workers)
        return ModelDigestResult(root, cfg, len(blocks),
                                 aux_digest_bytes=_merkle_reduce_aux(len(blocks),
                                                                     cfg.alg.digest_len))

    tags = [struct.pack("<Q", k) for k, _, _, _ in table.rows]
    digest = _lattice_sum_blocks(blocks, tags, workers)
    return ModelDigestResult(digest, cfg, len(blocks),
                             aux_digest_bytes=len(blocks) * LT_DIGEST_BYTES)


_DISPATCH = {
    Strategy.COALESCED: coalesce_hash,
    Strategy.PER_LAYER: per_layer_hash,
    Strategy.IN_PLACE: inplace_hash,
}


def hash_model(cfg: HashConfig, model: TensorMap, workers: int = 1) -> ModelDigestResult:
    """Validate the config and dispatch to the matching strategy."""
    cfg.validate()
    if cfg.ordered_per_layer:
        return ordered_lattice_per_layer(cfg, model, workers)
    return _DISPATCH[cfg.strategy](cfg, model, workers)


# --- manifest I/O -----------------------------------------------------------

def load_model(manifest_path) -> TensorMap:
    """Load a model from a JSON manifest plus raw data file.

    Each tensor is allocated as its own bytes object to reproduce the
    fragmented layout of a framework checkpoint in accelerator memory.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
        tensors = manifest["tensors"]
        data_path = manifest_path.parent / manifest["data"]
        raw = data_path.read_bytes()
        entries = []
        for t in tensors:
            off, length = int(t["offset"]), int(t["length"])
            if off < 0 or off + length > len(raw):
                raise FormatError(
                    f"tensor {t['name']!r} range [{off}, {off + length}) exceeds data file")
            entries.append((t["name"], bytes(raw[off : off + length])))
    except FormatError:
        raise
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad model manifest {manifest_path}: {exc}") from exc
    return TensorMap(entries)


def save_model(model: TensorMap, manifest_path, data_name: Optional[str] = None) -> None:
    """Write a TensorMap as a manifest + concatenated data file."""
    manifest_path = Path(manifest_path)
    if data_name is None:
        data_name = manifest_path.stem + ".bin"
    tensors = []
    offset = 0
    chunks = []
    for name, buf in model.entries:
        tensors.append({"name": name, "offset": offset, "length": len(buf)})
        chunks.append(buf)
        offset += len(buf)
    (manifest_path.parent / data_name).write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps({"tensors": tensors, "data": data_name}, indent=2))
