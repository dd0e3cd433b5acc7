"""Strategy-comparison benchmark: synthetic models, timed hashing cells.

Synthetic models preserve the layer-count / total-size ratios of well-known
architectures, scaled down by a factor so the per-layer vs in-place
trade-off remains visible at desk scale. Every timed cell is first checked
for digest consistency across worker counts; timings of unverified digests
are never reported.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .compression import CompressionAlg, sequential_hash
from .model import Construction, HashConfig, Strategy, TensorMap, hash_model

# (layer count, total size in MiB) shapes mirroring common architectures.
MODEL_SHAPES = {
    "resnet152": (932, 270),
    "bert": (199, 538),
    "gpt2": (149, 1077),
    "vgg19": (38, 1077),
    "gpt2-xl": (581, 8623),
}


def synthetic_model(shape: str, scale: float = 0.01, seed: int = 0) -> TensorMap:
    """Seeded pseudo-random model with a named architecture's shape ratios."""
    layers, size_mib = MODEL_SHAPES[shape]
    total = max(layers, int(size_mib * (1 << 20) * scale))
    rng = np.random.default_rng(seed)
    # Log-normal layer sizes normalized to the total, at least 1 byte each.
    weights = rng.lognormal(mean=0.0, sigma=1.0, size=layers)
    sizes = np.maximum(1, (weights / weights.sum() * total).astype(np.int64))
    entries = []
    for i, size in enumerate(sizes):
        data = rng.integers(0, 256, size=int(size), dtype=np.uint8).tobytes()
        entries.append((f"layer_{i:04d}", data))
    return TensorMap(entries)


@dataclass
class BenchCell:
    shape: str
    construction: str
    compression: str
    strategy: str
    workers: int
    median_ms: float
    speedup_vs_sequential: float
    digest: str
    verified: bool


def _configs(constructions: Sequence[str], compressions: Sequence[str],
             block_size: int) -> List[HashConfig]:
    configs = []
    for cons in constructions:
        if cons == "merkle":
            for comp in compressions:
                for strat in Strategy:
                    configs.append(HashConfig(Construction.MERKLE, strat,
                                              CompressionAlg.from_name(comp),
                                              block_size=block_size))
        else:
            for strat in Strategy:
                configs.append(HashConfig(Construction.LATTICE, strat,
                                          CompressionAlg.BLAKE2B, block_size=block_size))
            configs.append(HashConfig(Construction.LATTICE, Strategy.PER_LAYER,
                                      CompressionAlg.BLAKE2B, block_size=block_size,
                                      ordered_per_layer=True))
    return configs


def run_bench(shapes: Sequence[str] = ("resnet152", "vgg19"),
              scale: float = 0.01,
              worker_counts: Sequence[int] = (1, 4),
              repeats: int = 5,
              constructions: Sequence[str] = ("merkle", "lattice"),
              compressions: Sequence[str] = ("sha256",),
              block_size: int = 8192,
              seed: int = 0) -> List[BenchCell]:
    """Time every (shape x config x workers) cell; self-verify digests first."""
    cells: List[BenchCell] = []
    for shape in shapes:
        model = synthetic_model(shape, scale, seed)
        model_bytes = [buf for _, buf in model.entries]
        baselines: Dict[str, float] = {}

        configs = _configs(constructions, compressions, block_size)
        for alg in {cfg.alg for cfg in configs}:
            # Baseline: straight sequential hash of the whole model under the
            # same compression function.
            times = []
            digest = None
            for _ in range(repeats):
                start = time.perf_counter()
                digest = sequential_hash(alg, iter(model_bytes))
                times.append(time.perf_counter() - start)
            baselines[alg.value] = statistics.median(times)
            cells.append(BenchCell(
                shape=shape, construction="sequential", compression=alg.value,
                strategy="baseline", workers=1,
                median_ms=baselines[alg.value] * 1000.0,
                speedup_vs_sequential=1.0, digest=digest.hex(), verified=True))

        for cfg in configs:
            baseline_s = baselines[cfg.alg.value]
            reference = hash_model(cfg, model, workers=1).digest_hex()
            for workers in worker_counts:
                digests = []
                times = []
                for _ in range(repeats):
                    start = time.perf_counter()
                    result = hash_model(cfg, model, workers=workers)
                    times.append(time.perf_counter() - start)
                    digests.append(result.digest_hex())
                verified = all(d == reference for d in digests)
                median_s = statistics.median(times)
                cells.append(BenchCell(
                    shape=shape,
                    construction=cfg.construction.value,
                    compression=cfg.alg.value,
                    strategy=cfg.strategy.value + ("+ordered" if cfg.ordered_per_layer else ""),
                    workers=workers,
                    median_ms=median_s * 1000.0,
                    speedup_vs_sequential=baseline_s / median_s if median_s > 0 else 0.0,
                    digest=digests[0],
                    verified=verified,
                ))
    return cells


def format_table(cells: List[BenchCell]) -> str:
    header = (f"{'shape':<10} {'construction':<12} {'compression':<11} "
              f"{'strategy':<18} {'workers':>7} {'median_ms':>10} {'speedup':>8} {'ok':>3}")
    lines = [header, "-" * len(header)]
    for c in cells:
        lines.append(
            f"{c.shape:<10} {c.construction:<12} {c.compression:<11} "
            f"{c.strategy:<18} {c.workers:>7} {c.median_ms:>10.2f} "
            f"{c.speedup_vs_sequential:>8.2f} {'y' if c.verified else 'N':>3}")
    return "\n".join(lines)
