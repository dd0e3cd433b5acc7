"""Parallel Merkle and lattice hashing, signing, and verification for ML artifacts."""

from .compression import CompressionAlg, Digest, compress_block, sequential_hash
from .lattice import LatticeDigest, lt_add, lt_hash_block, lt_reduce, lt_sub, lt_zero
from .merkle import DigestBuffer, ReductionState, hash_blocks, merkle_root, reduce_level
from .model import (
    BlockTable,
    Construction,
    HashConfig,
    ModelDigestResult,
    Strategy,
    TensorMap,
    coalesce_hash,
    hash_model,
    inplace_hash,
    load_model,
    ordered_lattice_per_layer,
    per_layer_hash,
    save_model,
)
from .dataset import (
    Batch,
    DatasetManifest,
    SampleRecord,
    SourceAccumulator,
    digest_dataset,
    finalize,
    hash_sample,
    iterate_batches,
    process_batch,
)
from .attestation import (
    Bundle,
    Envelope,
    KeyPair,
    Statement,
    Subject,
    Verdict,
    canonicalize,
    keygen,
    sign_bundle,
    verify_bundle,
)

__version__ = "0.1.0"
