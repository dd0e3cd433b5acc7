"""Command-line surface: key management, sign/verify workflows, benchmark.

Exit codes are stable across commands: 0 success / verified, 1 verification
failure, 2 usage, configuration, or I/O error. Verification always replays
the hashing configuration recorded in the bundle predicate and never trusts
hash flags given on the command line.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import attestation, bench, dataset, model
from .attestation import (
    Bundle,
    DATASET_PREDICATE_TYPE,
    KeyPair,
    MODEL_PREDICATE_TYPE,
    Statement,
    Subject,
    Verdict,
    sign_bundle,
    verify_bundle,
)
from .compression import CompressionAlg
from .errors import SentinelError
from .lattice import LatticeDigest
from .model import Construction, HashConfig, INDEX_ENCODING, Strategy
from .workers import resolve_workers

BUNDLE_SUFFIX = ".bundle.json"


def _fail(message: str, code: int = 2):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _hash_flags(fn):
    fn = click.option("--construction", type=click.Choice(["merkle", "lattice"]),
                      default="merkle", show_default=True)(fn)
    fn = click.option("--compression", type=click.Choice(["sha256", "blake2b", "sha3-256"]),
                      default=None, help="Compression function (lattice is fixed to blake2b).")(fn)
    fn = click.option("--strategy", type=click.Choice(["coalesced", "per-layer", "in-place"]),
                      default="in-place", show_default=True)(fn)
    fn = click.option("--block-size", type=int, default=model.DEFAULT_BLOCK_SIZE,
                      show_default=True)(fn)
    fn = click.option("--ordered", is_flag=True,
                      help="Size-ordered lattice per-layer accumulation.")(fn)
    return fn


def _build_config(construction, compression, strategy, block_size, ordered) -> HashConfig:
    cons = Construction(construction)
    if compression is None:
        compression = "blake2b" if cons is Construction.LATTICE else "sha256"
    cfg = HashConfig(cons, Strategy(strategy), CompressionAlg.from_name(compression),
                     block_size=block_size, ordered_per_layer=ordered)
    cfg.validate()
    return cfg


def _digest_map(result: model.ModelDigestResult) -> dict:
    if result.config.construction is Construction.LATTICE:
        return {"lthash": result.model_digest.hex()}
    return {result.config.alg.value: result.model_digest.hex()}


@click.group()
def main():
    """Authenticate ML models and datasets with parallel hash constructions."""


@main.command()
@click.argument("out_prefix", type=click.Path(path_type=Path))
@click.option("--force", is_flag=True, help="Overwrite existing key files.")
def keygen(out_prefix: Path, force: bool):
    """Generate a P-256 key pair at OUT_PREFIX.key.pem / OUT_PREFIX.pub.pem."""
    try:
        pair = KeyPair.generate()
        pair.save(out_prefix.with_suffix(".key.pem"), out_prefix.with_suffix(".pub.pem"),
                  force=force)
    except SentinelError as exc:
        _fail(str(exc))
    click.echo(f"wrote {out_prefix.with_suffix('.key.pem')} and "
               f"{out_prefix.with_suffix('.pub.pem')}")


@main.command("sign-model")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--key", "key_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help=f"Bundle output path [default: MANIFEST{BUNDLE_SUFFIX}]")
@_hash_flags
@click.option("--workers", type=int, default=None, help="Worker count [default: cores].")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def sign_model(manifest, key_path, out_path, construction, compression, strategy,
               block_size, ordered, workers, as_json):
    """Hash a model manifest and write a signed attestation bundle."""
    import time

    try:
        cfg = _build_config(construction, compression, strategy, block_size, ordered)
        tensors = model.load_model(manifest)
        key = KeyPair.load(key_path)
        nworkers = resolve_workers(workers)
        start = time.perf_counter()
        result = model.hash_model(cfg, tensors, workers=nworkers)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        predicate = cfg.predicate()
        if result.layer_digests is not None:
            predicate["layer_digests"] = {name: d.hex()
                                          for name, d in result.layer_digests.items()}
        stmt = Statement([Subject(manifest.name, _digest_map(result))],
                         MODEL_PREDICATE_TYPE, predicate)
        bundle_obj = sign_bundle(stmt, key)
        if out_path is None:
            out_path = manifest.with_name(manifest.name + BUNDLE_SUFFIX)
        bundle_obj.save(out_path)
    except SentinelError as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps({"bundle": str(out_path), "digest": result.digest_hex(),
                               "blocks": result.block_count, "hash_ms": elapsed_ms}))
    else:
        click.echo(f"digest: {result.digest_hex()}")
        click.echo(f"blocks: {result.block_count}  hash time: {elapsed_ms:.2f} ms")
        click.echo(f"bundle: {out_path}")


@main.command("verify-model")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.argument("bundle_path", type=click.Path(exists=True, path_type=Path))
@click.option("--workers", type=int, default=None)
def verify_model(manifest, bundle_path, workers):
    """Recompute a model digest per the bundle predicate and verify."""
    try:
        bundle_obj = Bundle.load_file(bundle_path)
    except SentinelError:
        click.echo(Verdict.MALFORMED.value)
        sys.exit(1)
    try:
        stmt = bundle_obj.statement()
        cfg = HashConfig.from_predicate(stmt.predicate)
    except SentinelError:
        click.echo(Verdict.MALFORMED.value)
        sys.exit(1)
    try:
        tensors = model.load_model(manifest)
        result = model.hash_model(cfg, tensors, workers=resolve_workers(workers))
    except SentinelError as exc:
        _fail(str(exc))
    verdict = verify_bundle(bundle_obj, {manifest.name: _digest_map(result)})
    click.echo(verdict.value)
    sys.exit(0 if verdict is Verdict.OK else 1)


@main.command("sign-dataset")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--key", "key_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Directory for per-source bundles [default: manifest directory].")
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--shuffle-seed", type=int, default=0, show_default=True)
@click.option("--cover-labels", is_flag=True, help="Fold label bytes into sample digests.")
def sign_dataset(manifest, key_path, out_dir, batch_size, shuffle_seed, cover_labels):
    """Stream a dataset and write one signed bundle per data source."""
    try:
        ds = dataset.DatasetManifest.load(manifest)
        key = KeyPair.load(key_path)
        finalized = dataset.digest_dataset(ds, batch_size, shuffle_seed, cover_labels)
    except SentinelError as exc:
        _fail(str(exc))
    if out_dir is None:
        out_dir = manifest.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    for sid, (digest, count) in finalized.items():
        stmt = Statement(
            [Subject(f"{manifest.name}:source:{sid}", {"lthash": digest.hex()})],
            DATASET_PREDICATE_TYPE,
            {"source_id": sid, "sample_count": count, "cover_labels": cover_labels,
             "index_encoding": INDEX_ENCODING},
        )
        path = out_dir / f"{manifest.stem}.source-{sid}{BUNDLE_SUFFIX}"
        sign_bundle(stmt, key).save(path)
        click.echo(f"source {sid}: {count} samples -> {path}")


@main.command("verify-dataset")
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--bundles", "bundles_dir", type=click.Path(exists=True, path_type=Path),
              default=None, help="Directory of per-source bundles [default: manifest directory].")
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--shuffle-seed", type=int, default=0, show_default=True)
def verify_dataset(manifest, bundles_dir, batch_size, shuffle_seed):
    """Recompute per-source digests and verify every source's bundle."""
    try:
        ds = dataset.DatasetManifest.load(manifest)
    except SentinelError as exc:
        _fail(str(exc))
    if bundles_dir is None:
        bundles_dir = manifest.parent
    if not ds.samples:
        click.echo("warning: dataset is empty, nothing to verify")
        sys.exit(0)

    # cover_labels is read from the first source bundle's predicate so the
    # pipeline replays exactly what was signed.
    cover_labels = None
    bundles = {}
    failed = False
    for sid in sorted(ds.source_ids):
        path = bundles_dir / f"{manifest.stem}.source-{sid}{BUNDLE_SUFFIX}"
        try:
            bundle_obj = Bundle.load_file(path)
            pred = bundle_obj.statement().predicate
        except SentinelError:
            click.echo(f"source {sid}: missing or unreadable bundle {path}")
            failed = True
            continue
        bundles[sid] = bundle_obj
        if cover_labels is None:
            cover_labels = bool(pred.get("cover_labels", False))

    if failed:
        sys.exit(1)
    try:
        finalized = dataset.digest_dataset(ds, batch_size, shuffle_seed,
                                           cover_labels=bool(cover_labels))
    except SentinelError as exc:
        _fail(str(exc))

    for sid, bundle_obj in bundles.items():
        digest, _count = finalized[sid]
        verdict = verify_bundle(
            bundle_obj, {f"{manifest.name}:source:{sid}": {"lthash": digest.hex()}})
        click.echo(f"source {sid}: {verdict.value}")
        if verdict is not Verdict.OK:
            failed = True
    sys.exit(1 if failed else 0)


@main.command("bench")
@click.option("--sizes", "shapes", multiple=True,
              type=click.Choice(sorted(bench.MODEL_SHAPES)),
              default=("resnet152", "vgg19"), show_default=True)
@click.option("--scale", type=float, default=0.01, show_default=True,
              help="Fraction of the real architecture size to generate.")
@click.option("--workers", "worker_list", default="1,4", show_default=True,
              help="Comma-separated worker counts.")
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--block-size", type=int, default=model.DEFAULT_BLOCK_SIZE, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def cmd_bench(shapes, scale, worker_list, repeats, block_size, as_json):
    """Time every hashing strategy on synthetic models; self-verify digests."""
    try:
        worker_counts = [int(w) for w in worker_list.split(",")]
    except ValueError:
        _fail(f"bad --workers list: {worker_list!r}")
    cells = bench.run_bench(shapes=shapes, scale=scale, worker_counts=worker_counts,
                            repeats=repeats, block_size=block_size)
    if as_json:
        click.echo(json.dumps([dataclasses.asdict(c) for c in cells], indent=2))
    else:
        click.echo(bench.format_table(cells))
    if not all(c.verified for c in cells):
        click.echo("digest self-verification FAILED for marked cells", err=True)
        sys.exit(1)


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, path_type=Path))
def inspect(bundle_path):
    """Pretty-print a bundle's decoded payload."""
    try:
        bundle_obj = Bundle.load_file(bundle_path)
        stmt = bundle_obj.statement()
    except SentinelError as exc:
        _fail(str(exc))
    click.echo(json.dumps(stmt.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
