"""Pluggable proof abstraction with a hash-commitment mock backend.

The mock backend models a succinct proof as a blinded commitment to the
privacy-preserved credentials plus a tag binding that commitment to the
proving key.  It provides completeness, tamper rejection and key separation;
it is not sound against a party holding the verification key, which in the
mock carries the proving-key material.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .errors import MalformedProof, UnsupportedBackend
from .identity import HASH_SIZE, Credentials, PrincipalKind, privacy_transform, sha256
from .rng import random_bytes

NONCE_SIZE = 16
RESERVED_SIZE = 32
PROOF_SIZE = 1 + HASH_SIZE + HASH_SIZE + NONCE_SIZE + RESERVED_SIZE  # 113
SUPPORTED_BACKENDS = ("mock",)

_KIND_CODE = {PrincipalKind.USER: 1, PrincipalKind.SERVICE: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass(frozen=True)
class ProvingKey:
    backend_id: str
    key_bytes: bytes


@dataclass(frozen=True)
class VerificationKey:
    backend_id: str
    key_bytes: bytes

    def pairs_with(self, kp: ProvingKey) -> bool:
        return self.backend_id == kp.backend_id and self.key_bytes == kp.key_bytes


@dataclass(frozen=True)
class ZkProof:
    commitment: bytes
    binding_tag: bytes
    nonce: bytes
    subject_kind: PrincipalKind

    def to_bytes(self) -> bytes:
        return (
            bytes([_KIND_CODE[self.subject_kind]])
            + self.commitment
            + self.binding_tag
            + self.nonce
            + bytes(RESERVED_SIZE)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ZkProof":
        if len(data) != PROOF_SIZE:
            raise MalformedProof(f"expected {PROOF_SIZE} bytes, got {len(data)}")
        if data[0] not in _CODE_KIND:
            raise MalformedProof(f"unknown subject kind code {data[0]}")
        if any(data[PROOF_SIZE - RESERVED_SIZE:]):
            raise MalformedProof("reserved bytes must be zero")
        c0 = 1
        t0 = c0 + HASH_SIZE
        n0 = t0 + HASH_SIZE
        return cls(
            commitment=data[c0:t0],
            binding_tag=data[t0:n0],
            nonce=data[n0:n0 + NONCE_SIZE],
            subject_kind=_CODE_KIND[data[0]],
        )


def keygen(rng: random.Random, backend_id: str = "mock") -> tuple[ProvingKey, VerificationKey]:
    if backend_id not in SUPPORTED_BACKENDS:
        raise UnsupportedBackend(backend_id)
    material = random_bytes(rng, 32)
    return ProvingKey(backend_id, material), VerificationKey(backend_id, material)


def _binding_tag(kind: PrincipalKind, commitment: bytes, nonce: bytes, key_bytes: bytes) -> bytes:
    return sha256(bytes([_KIND_CODE[kind]]) + commitment + nonce + key_bytes)


def prove(c: Credentials, kp: ProvingKey, nonce: bytes) -> ZkProof:
    if kp.backend_id not in SUPPORTED_BACKENDS:
        raise UnsupportedBackend(kp.backend_id)
    if len(nonce) != NONCE_SIZE:
        raise ValueError("nonce must be 16 bytes")
    commitment = sha256(privacy_transform(c) + nonce)
    tag = _binding_tag(c.kind, commitment, nonce, kp.key_bytes)
    return ZkProof(commitment, tag, nonce, c.kind)


def check(p: ZkProof, vk: VerificationKey) -> bool:
    """Pure verification: no delay is drawn."""
    if (
        len(p.commitment) != HASH_SIZE
        or len(p.binding_tag) != HASH_SIZE
        or len(p.nonce) != NONCE_SIZE
        or p.subject_kind not in _KIND_CODE
    ):
        raise MalformedProof("proof fields have the wrong sizes")
    if vk.backend_id not in SUPPORTED_BACKENDS:
        raise UnsupportedBackend(vk.backend_id)
    return _binding_tag(p.subject_kind, p.commitment, p.nonce, vk.key_bytes) == p.binding_tag


def opens_to(p: ZkProof, c: Credentials) -> bool:
    """True if ``p`` commits to exactly these credentials."""
    return sha256(privacy_transform(c) + p.nonce) == p.commitment


class VerificationOutcome(str, enum.Enum):
    SUCCESS = "zk-IdentityDataStoredSuccessfully"
    SERVICE_PROVIDER_VERIFICATION_FAILED = "ServiceProviderVerificationFailed"
    USER_VERIFICATION_FAILED = "UserVerificationFailed"


def final_verification(vs: bool, vu: bool) -> VerificationOutcome:
    # the service provider is checked first, so its failure wins
    if not vs:
        return VerificationOutcome.SERVICE_PROVIDER_VERIFICATION_FAILED
    if not vu:
        return VerificationOutcome.USER_VERIFICATION_FAILED
    return VerificationOutcome.SUCCESS


@dataclass
class ProofSystem:
    """Seeded prover/verifier pair with a simulated verification delay.

    ``verify`` draws a delay uniformly from ``verify_delay_ms``, records it in
    ``delays`` and advances ``clock`` (anything with ``advance(ms)``) if one is
    passed.
    """

    rng: random.Random
    verify_delay_ms: tuple[float, float] = (10.0, 50.0)
    backend_id: str = "mock"
    delays: list = field(default_factory=list)
    nonces: list = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.verify_delay_ms
        if lo < 0 or lo > hi:
            raise ValueError(f"bad verification delay interval {self.verify_delay_ms}")
        if self.backend_id not in SUPPORTED_BACKENDS:
            raise UnsupportedBackend(self.backend_id)

    def keygen(self):
        return keygen(self.rng, self.backend_id)

    def prove(self, c: Credentials, kp: ProvingKey, nonce: bytes | None = None) -> ZkProof:
        c.validate()
        if nonce is None:
            nonce = random_bytes(self.rng, NONCE_SIZE)
        self.nonces.append(nonce)
        return prove(c, kp, nonce)

    def verify(self, p: ZkProof, vk: VerificationKey, clock=None) -> bool:
        ok = check(p, vk)
        d = self.rng.uniform(*self.verify_delay_ms)
        self.delays.append(d)
        if clock is not None:
            clock.advance(d)
        return ok

