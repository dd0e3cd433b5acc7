import base64
import json
import random

import pytest

from sentinel.attestation import (
    Bundle,
    KeyPair,
    MODEL_PREDICATE_TYPE,
    Statement,
    Subject,
    Verdict,
    canonicalize,
    pae,
    sign_bundle,
    verify_bundle,
)
from sentinel.errors import FormatError, KeyMaterialError


def _statement(digest_hex="ab" * 32):
    return Statement(
        [Subject("model.json", {"sha256": digest_hex})],
        MODEL_PREDICATE_TYPE,
        {"construction": "merkle", "compression": "sha256", "strategy": "in-place",
         "block_size": 8192, "index_encoding": "le64-prefix-v1"},
    )


@pytest.fixture(scope="module")
def key():
    return KeyPair.generate()


def test_canonicalize_sorts_keys():
    stmt = _statement()
    stmt.predicate = {"b": 1, "a": 2}
    out = canonicalize(stmt)
    assert b'{"a":2,"b":1}' in out
    assert b" " not in out.split(b'"predicate"')[1].split(b"}")[0]


def test_canonicalize_idempotent_round_trip():
    stmt = _statement()
    payload = canonicalize(stmt)
    reparsed = Statement.from_dict(json.loads(payload))
    assert canonicalize(reparsed) == payload


def test_canonicalize_golden():
    # frozen after the first correct run; cross-checked with an independent
    # serializer in test_canonical_matches_plain_json_dump
    stmt = Statement([Subject("m", {"sha256": "00" * 32})], "pred/v1", {"k": 1})
    assert canonicalize(stmt) == (
        b'{"_type":"https://in-toto.io/Statement/v1","predicate":{"k":1},'
        b'"predicateType":"pred/v1","subject":[{"digest":{"sha256":"'
        + b"00" * 32 + b'"},"name":"m"}]}')


def test_canonical_matches_plain_json_dump():
    stmt = _statement()
    expected = json.dumps(stmt.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    assert canonicalize(stmt) == expected


def test_statement_requires_subject():
    with pytest.raises(FormatError):
        canonicalize(Statement([], "t", {}))


def test_statement_rejects_wrong_digest_length():
    with pytest.raises(FormatError):
        Statement([Subject("m", {"sha256": "ab" * 16})], "t", {}).validate()
    with pytest.raises(FormatError):
        Statement([Subject("m", {"sha256": "zz" * 32})], "t", {}).validate()


def test_pae_format():
    assert pae("t", b"body") == b"DSSEv1 1 t 4 body"


def test_sign_verify_round_trip(key):
    bundle = sign_bundle(_statement(), key)
    assert verify_bundle(bundle, {"model.json": {"sha256": "ab" * 32}}) is Verdict.OK


def test_deterministic_signatures(key):
    stmt = _statement()
    sig1 = sign_bundle(stmt, key).envelope.signatures[0]["sig"]
    sig2 = sign_bundle(stmt, key).envelope.signatures[0]["sig"]
    assert sig1 == sig2


def test_digest_mismatch(key):
    bundle = sign_bundle(_statement(), key)
    assert verify_bundle(bundle, {"model.json": {"sha256": "cd" * 32}}) is \
        Verdict.DIGEST_MISMATCH
    assert verify_bundle(bundle, {"other": {"sha256": "ab" * 32}}) is Verdict.DIGEST_MISMATCH
    assert verify_bundle(bundle, {"model.json": {"sha3-256": "ab" * 32}}) is \
        Verdict.DIGEST_MISMATCH


def test_wrong_key_rejected(key):
    bundle = sign_bundle(_statement(), key)
    other = KeyPair.generate()
    bundle.verification_material["public_key"] = other.public_point_hex
    assert verify_bundle(bundle, {"model.json": {"sha256": "ab" * 32}}) is \
        Verdict.SIGNATURE_INVALID


def test_payload_tamper_is_signature_invalid(key):
    rng = random.Random(0)
    recomputed = {"model.json": {"sha256": "ab" * 32}}
    for _ in range(100):
        bundle = sign_bundle(_statement(), key)
        payload = bytearray(base64.b64decode(bundle.envelope.payload))
        payload[rng.randrange(len(payload))] ^= 1 << rng.randrange(8)
        bundle.envelope.payload = base64.b64encode(bytes(payload)).decode()
        verdict = verify_bundle(bundle, recomputed)
        # a flip that corrupts the JSON structure parses as malformed instead
        assert verdict in (Verdict.SIGNATURE_INVALID, Verdict.MALFORMED)
        assert verdict is not Verdict.OK


def test_signature_tamper(key):
    rng = random.Random(1)
    for _ in range(50):
        bundle = sign_bundle(_statement(), key)
        sig = bytearray(base64.b64decode(bundle.envelope.signatures[0]["sig"]))
        sig[rng.randrange(len(sig))] ^= 1 << rng.randrange(8)
        bundle.envelope.signatures[0]["sig"] = base64.b64encode(bytes(sig)).decode()
        verdict = verify_bundle(bundle, {"model.json": {"sha256": "ab" * 32}})
        # a corrupted DER signature may fail to parse at all
        assert verdict in (Verdict.SIGNATURE_INVALID, Verdict.MALFORMED)


def test_malformed_structures(key):
    bundle = sign_bundle(_statement(), key)
    with pytest.raises(FormatError):
        Bundle.from_json("{not json")
    with pytest.raises(FormatError):
        Bundle.from_dict({"envelope": {}})
    broken = bundle.to_dict()
    broken["envelope"]["payload"] = "@@@not-base64@@@"
    assert verify_bundle(Bundle.from_dict(broken), {}) is Verdict.MALFORMED
    broken = bundle.to_dict()
    broken["verificationMaterial"]["public_key"] = "deadbeef"
    assert verify_bundle(Bundle.from_dict(broken), {}) is Verdict.MALFORMED


def test_bundle_json_round_trip(tmp_path, key):
    bundle = sign_bundle(_statement(), key)
    bundle.save(tmp_path / "b.bundle.json")
    loaded = Bundle.load_file(tmp_path / "b.bundle.json")
    assert loaded.to_dict() == bundle.to_dict()
    assert verify_bundle(loaded, {"model.json": {"sha256": "ab" * 32}}) is Verdict.OK


def test_key_store_load_round_trip(tmp_path):
    pair = KeyPair.generate()
    pair.save(tmp_path / "k.key.pem", tmp_path / "k.pub.pem")
    loaded = KeyPair.load(tmp_path / "k.key.pem")
    assert loaded.public_point_hex == pair.public_point_hex
    with pytest.raises(KeyMaterialError):
        pair.save(tmp_path / "k.key.pem", tmp_path / "k.pub.pem")
    pair.save(tmp_path / "k.key.pem", tmp_path / "k.pub.pem", force=True)


def test_distinct_keygen():
    assert KeyPair.generate().public_point_hex != KeyPair.generate().public_point_hex


def test_verdict_precedence(key):
    # malformed beats signature-invalid beats digest-mismatch
    bundle = sign_bundle(_statement(), key)
    broken = bundle.to_dict()
    broken["envelope"]["payload"] = "@@@"
    assert verify_bundle(Bundle.from_dict(broken), {}) is Verdict.MALFORMED
    other = KeyPair.generate()
    bundle.verification_material["public_key"] = other.public_point_hex
    assert verify_bundle(bundle, {"model.json": {"sha256": "cd" * 32}}) is \
        Verdict.SIGNATURE_INVALID
