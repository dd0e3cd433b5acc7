"""Streaming per-source digest accumulation over shuffled sample batches.

Every sample is lattice-hashed with its stable sample id as the index tag,
so the final per-source digests are a pure function of each source's sample
multiset: shuffle order, batch size, and worker interleaving never change
the result. Batches are grouped by source id, each group is reduced to a
batch digest, and the batch digest is added to that source's running sum.
"""

from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .errors import FormatError, ValidationError
from .lattice import LatticeDigest, lt_add, lt_hash_block, lt_hash_tagged, lt_reduce, lt_zero
from .workers import run_tasks


@dataclass(frozen=True)
class SampleRecord:
    sample_id: int
    source_id: int
    label: bytes
    data: bytes


@dataclass
class Batch:
    samples: List[SampleRecord]

    @property
    def size(self) -> int:
        return len(self.samples)


def hash_sample(s: SampleRecord, cover_labels: bool = False) -> LatticeDigest:
    """Lattice hash of one sample, tagged with its stable sample id.

    The digest covers the raw data only; with cover_labels the label bytes
    are folded in between the id tag and the data.
    """
    if cover_labels:
        return lt_hash_tagged(struct.pack("<Q", s.sample_id) + s.label, s.data)
    return lt_hash_block(s.sample_id, s.data)


@dataclass
class SourceAccumulator:
    """Per-source running lattice sums plus sample counts."""

    sums: Dict[int, LatticeDigest] = field(default_factory=dict)
    counts: Dict[int, int] = field(default_factory=dict)
    declared_sources: Optional[frozenset] = None
    cover_labels: bool = False

    def declare(self, source_ids: Iterable[int]) -> None:
        self.declared_sources = frozenset(source_ids)
        for sid in self.declared_sources:
            self.sums.setdefault(sid, lt_zero())
            self.counts.setdefault(sid, 0)

    def merge(self, other: "SourceAccumulator") -> None:
        """Fold another accumulator in; any merge schedule gives one result."""
        for sid, digest in other.sums.items():
            self.sums[sid] = lt_add(self.sums.get(sid, lt_zero()), digest)
            self.counts[sid] = self.counts.get(sid, 0) + other.counts.get(sid, 0)


def process_batch(batch: Batch, acc: SourceAccumulator) -> SourceAccumulator:
    """Group a batch by source, reduce each group, add to the running sums."""
    groups: Dict[int, List[SampleRecord]] = {}
    for s in batch.samples:
        if acc.declared_sources is not None and s.source_id not in acc.declared_sources:
            raise ValidationError(f"sample {s.sample_id} references undeclared source "
                                  f"{s.source_id}")
        groups.setdefault(s.source_id, []).append(s)
    for sid, samples in groups.items():
        batch_digest = lt_reduce(hash_sample(s, acc.cover_labels) for s in samples)
        acc.sums[sid] = lt_add(acc.sums.get(sid, lt_zero()), batch_digest)
        acc.counts[sid] = acc.counts.get(sid, 0) + len(samples)
    return acc


def finalize(acc: SourceAccumulator) -> Dict[int, Tuple[LatticeDigest, int]]:
    """Final per-source digests and sample counts."""
    return {sid: (acc.sums[sid], acc.counts.get(sid, 0)) for sid in sorted(acc.sums)}


@dataclass
class DatasetManifest:
    """Sample index over a flat binary shard, with optional expected digests."""

    samples: List[Tuple[int, int, bytes, int, int]]  # (sample_id, source_id, label, offset, length)
    data_path: Path
    expected_digests: Dict[int, str] = field(default_factory=dict)

    @property
    def source_ids(self) -> frozenset:
        return frozenset(sid for _, sid, _, _, _ in self.samples)

    @classmethod
    def load(cls, manifest_path) -> "DatasetManifest":
        manifest_path = Path(manifest_path)
        try:
            doc = json.loads(manifest_path.read_text())
            samples = [
                (int(s["sample_id"]), int(s["source_id"]),
                 str(s.get("label", "")).encode(), int(s["offset"]), int(s["length"]))
                for s in doc["samples"]
            ]
            data_path = manifest_path.parent / doc["data"]
            expected = {int(k): v for k, v in doc.get("expected_digests", {}).items()}
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad dataset manifest {manifest_path}: {exc}") from exc
        ids = [sid for sid, *_ in samples]
        if len(set(ids)) != len(ids):
            raise FormatError("sample ids must be unique within a dataset")
        return cls(samples, data_path, expected)

    def save(self, manifest_path, shard: bytes) -> None:
        manifest_path = Path(manifest_path)
        doc = {
            "samples": [
                {"sample_id": sid, "source_id": src, "label": label.decode(),
                 "offset": off, "length": length}
                for sid, src, label, off, length in self.samples
            ],
            "data": self.data_path.name,
            "expected_digests": self.expected_digests,
        }
        (manifest_path.parent / self.data_path.name).write_bytes(shard)
        manifest_path.write_text(json.dumps(doc))


def iterate_batches(manifest: DatasetManifest, batch_size: int,
                    shuffle_seed: int) -> Iterator[Batch]:
    """Yield every sample exactly once in a seed-determined shuffle.

    The digest pipeline downstream is invariant to both the seed and the
    batch size; shuffling here only models a training loader's access order.
    """
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    try:
        shard = memoryview(manifest.data_path.read_bytes())
    except OSError as exc:
        raise FormatError(f"cannot read data shard {manifest.data_path}: {exc}") from exc
    size = len(shard)
    order = list(range(len(manifest.samples)))
    random.Random(shuffle_seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        records = []
        for idx in order[start : start + batch_size]:
            sid, src, label, off, length = manifest.samples[idx]
            if off < 0 or off + length > size:
                raise FormatError(f"sample {sid} range [{off}, {off + length}) exceeds shard")
            records.append(SampleRecord(sid, src, label, bytes(shard[off : off + length])))
        yield Batch(records)


def digest_dataset(manifest: DatasetManifest, batch_size: int = 128, shuffle_seed: int = 0,
                   cover_labels: bool = False,
                   workers: int = 1) -> Dict[int, Tuple[LatticeDigest, int]]:
    """Run the full pipeline over a manifest and return finalized digests.

    With workers > 1, batches are distributed round-robin over per-worker
    partial accumulators that are merged at the end; the commutative merge
    makes the result identical for any worker count.
    """
    acc = SourceAccumulator(cover_labels=cover_labels)
    acc.declare(manifest.source_ids)
    batches = iterate_batches(manifest, batch_size, shuffle_seed)
    if workers <= 1:
        for batch in batches:
            process_batch(batch, acc)
        return finalize(acc)

    batch_list = list(batches)
    partials = [SourceAccumulator(declared_sources=acc.declared_sources,
                                  cover_labels=cover_labels)
                for _ in range(min(workers, max(1, len(batch_list))))]

    def work(w: int) -> SourceAccumulator:
        for batch in batch_list[w :: len(partials)]:
            process_batch(batch, partials[w])
        return partials[w]

    for partial in run_tasks([lambda w=w: work(w) for w in range(len(partials))], workers):
        acc.merge(partial)
    return finalize(acc)
