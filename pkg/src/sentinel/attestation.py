"""Signed attestation bundles binding artifact digests to provider keys.

The payload is layered: an in-toto-style Statement (subjects with digest
maps plus a predicate recording every hashing parameter needed to replay
verification) is serialized canonically, wrapped in a DSSE envelope whose
pre-authentication encoding is signed with deterministic ECDSA P-256, and
the envelope plus the raw public key form the bundle. Identity
infrastructure (certificates, transparency logs) is out of scope; the
verification material is the public key itself.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec

from .errors import FormatError, KeyMaterialError

STATEMENT_TYPE = "https://in-toto.io/Statement/v1"
PAYLOAD_TYPE = "application/vnd.in-toto+json"
MODEL_PREDICATE_TYPE = "https://sentinel.dev/predicates/model-hashing/v1"
DATASET_PREDICATE_TYPE = "https://sentinel.dev/predicates/dataset-hashing/v1"

# Expected hex lengths for digest-map entries we know how to check.
_DIGEST_HEX_LEN = {"sha256": 64, "blake2b": 128, "sha3-256": 64, "lthash": 128}


class Verdict(enum.Enum):
    OK = "OK"
    SIGNATURE_INVALID = "SIGNATURE_INVALID"
    DIGEST_MISMATCH = "DIGEST_MISMATCH"
    MALFORMED = "MALFORMED"


@dataclass
class Subject:
    name: str
    digest_map: Dict[str, str]


@dataclass
class Statement:
    subjects: List[Subject]
    predicate_type: str
    predicate: Dict[str, object]
    type_uri: str = STATEMENT_TYPE

    def validate(self) -> None:
        if not self.subjects:
            raise FormatError("statement requires at least one subject")
        for subj in self.subjects:
            if not subj.digest_map:
                raise FormatError(f"subject {subj.name!r} has no digests")
            for alg, hexdigest in subj.digest_map.items():
                try:
                    raw = bytes.fromhex(hexdigest)
                except ValueError as exc:
                    raise FormatError(f"subject {subj.name!r}: bad hex digest") from exc
                expected = _DIGEST_HEX_LEN.get(alg)
                if expected is not None and len(raw) * 2 != expected:
                    raise FormatError(
                        f"subject {subj.name!r}: {alg} digest has wrong length")

    def to_dict(self) -> Dict[str, object]:
        return {
            "_type": self.type_uri,
            "subject": [{"name": s.name, "digest": dict(s.digest_map)} for s in self.subjects],
            "predicateType": self.predicate_type,
            "predicate": self.predicate,
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, object]) -> "Statement":
        try:
            subjects = [Subject(str(s["name"]), dict(s["digest"])) for s in doc["subject"]]
            stmt = cls(subjects, str(doc["predicateType"]), dict(doc["predicate"]),
                       type_uri=str(doc["_type"]))
        except (KeyError, TypeError, AttributeError) as exc:
            raise FormatError(f"bad statement structure: {exc}") from exc
        stmt.validate()
        return stmt


def canonicalize(stmt: Statement) -> bytes:
    """Stable byte serialization: sorted keys, no whitespace, UTF-8."""
    stmt.validate()
    try:
        return json.dumps(stmt.to_dict(), sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False).encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise FormatError(f"statement not serializable: {exc}") from exc


def pae(payload_type: str, payload: bytes) -> bytes:
    """DSSE v1 pre-authentication encoding of the signed content."""
    pt = payload_type.encode("utf-8")
    return b"DSSEv1 %d %s %d %s" % (len(pt), pt, len(payload), payload)


@dataclass
class KeyPair:
    """ECDSA P-256 signing key with uncompressed-point public material."""

    private_key: ec.EllipticCurvePrivateKey

    @classmethod
    def generate(cls) -> "KeyPair":
        return cls(ec.generate_private_key(ec.SECP256R1()))

    @property
    def public_key(self) -> ec.EllipticCurvePublicKey:
        return self.private_key.public_key()

    @property
    def public_point_hex(self) -> str:
        return self.public_key.public_bytes(
            serialization.Encoding.X962,
            serialization.PublicFormat.UncompressedPoint).hex()

    @property
    def key_id(self) -> str:
        spki = self.public_key.public_bytes(
            serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo)
        return hashlib.sha256(spki).hexdigest()[:16]

    def save(self, private_path, public_path, force: bool = False) -> None:
        private_path, public_path = Path(private_path), Path(public_path)
        if not force and (private_path.exists() or public_path.exists()):
            raise KeyMaterialError("key files already exist; pass force to overwrite")
        private_path.write_bytes(self.private_key.private_bytes(
            serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption()))
        public_path.write_bytes(self.public_key.public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo))

    @classmethod
    def load(cls, private_path) -> "KeyPair":
        try:
            key = serialization.load_pem_private_key(Path(private_path).read_bytes(),
                                                     password=None)
        except (OSError, ValueError) as exc:
            raise KeyMaterialError(f"cannot load private key {private_path}: {exc}") from exc
        if not isinstance(key, ec.EllipticCurvePrivateKey):
            raise KeyMaterialError("private key is not an EC key")
        return cls(key)


def keygen() -> KeyPair:
    return KeyPair.generate()


@dataclass
class Envelope:
    payload: str  # base64 of the canonical statement bytes
    payload_type: str
    signatures: List[Dict[str, str]]  # [{"keyid": ..., "sig": base64}]


@dataclass
class Bundle:
    verification_material: Dict[str, str]  # {"public_key": uncompressed point hex}
    envelope: Envelope

    def to_dict(self) -> Dict[str, object]:
        return {
            "verificationMaterial": dict(self.verification_material),
            "envelope": {
                "payload": self.envelope.payload,
                "payloadType": self.envelope.payload_type,
                "signatures": list(self.envelope.signatures),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: Dict[str, object]) -> "Bundle":
        try:
            env = doc["envelope"]
            bundle = cls(
                verification_material=dict(doc["verificationMaterial"]),
                envelope=Envelope(str(env["payload"]), str(env["payloadType"]),
                                  [dict(s) for s in env["signatures"]]),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise FormatError(f"bad bundle structure: {exc}") from exc
        if not bundle.envelope.signatures:
            raise FormatError("bundle has no signatures")
        if "public_key" not in bundle.verification_material:
            raise FormatError("bundle has no verification material")
        return bundle

    @classmethod
    def from_json(cls, text: str) -> "Bundle":
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise FormatError(f"bundle is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load_file(cls, path) -> "Bundle":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise FormatError(f"cannot read bundle {path}: {exc}") from exc
        return cls.from_json(text)

    def statement(self) -> Statement:
        try:
            payload = base64.b64decode(self.envelope.payload, validate=True)
            doc = json.loads(payload)
        except (ValueError, TypeError) as exc:
            raise FormatError(f"bundle payload undecodable: {exc}") from exc
        return Statement.from_dict(doc)


def sign_bundle(stmt: Statement, key: KeyPair) -> Bundle:
    """Sign a statement's DSSE encoding and wrap it into a bundle.

    The nonce is deterministic (RFC 6979 style), so re-signing the same
    statement with the same key reproduces identical signature bytes.
    """
    payload = canonicalize(stmt)
    signed = pae(PAYLOAD_TYPE, payload)
    try:
        sig = key.private_key.sign(
            signed, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))
    except Exception as exc:  # unusable key material
        raise KeyMaterialError(f"signing failed: {exc}") from exc
    envelope = Envelope(
        payload=base64.b64encode(payload).decode("ascii"),
        payload_type=PAYLOAD_TYPE,
        signatures=[{"keyid": key.key_id, "sig": base64.b64encode(sig).decode("ascii")}],
    )
    return Bundle({"public_key": key.public_point_hex}, envelope)


def verify_bundle(bundle: Bundle, recomputed: Mapping[str, Mapping[str, str]]) -> Verdict:
    """Check structure, then signature, then digests, in that order.

    `recomputed` maps subject name to {alg-name: hex digest} freshly
    computed from the artifact. Every subject and every declared algorithm
    must match for an OK verdict.
    """
    try:
        stmt = bundle.statement()
        payload = base64.b64decode(bundle.envelope.payload, validate=True)
        point = bytes.fromhex(bundle.verification_material["public_key"])
        public_key = ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), point)
        sigs = [base64.b64decode(s["sig"], validate=True) for s in bundle.envelope.signatures]
        if not sigs:
            raise FormatError("no signatures")
    except (FormatError, KeyError, ValueError, TypeError):
        return Verdict.MALFORMED

    signed = pae(bundle.envelope.payload_type, payload)
    for sig in sigs:
        try:
            public_key.verify(sig, signed, ec.ECDSA(hashes.SHA256()))
        except InvalidSignature:
            return Verdict.SIGNATURE_INVALID

    for subj in stmt.subjects:
        fresh = recomputed.get(subj.name)
        if fresh is None:
            return Verdict.DIGEST_MISMATCH
        for alg, hexdigest in subj.digest_map.items():
            if fresh.get(alg) != hexdigest:
                return Verdict.DIGEST_MISMATCH
    return Verdict.OK
