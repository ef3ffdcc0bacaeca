"""Credentials, privacy transform and salted zk-identities.

The privacy transform produces a canonical byte string in which every
identifying string (principal id, subject/object attribute pairs) is
replaced by its SHA-256 digest, while numeric attributes pass through as
fixed-point integers so they can still feed the fuzzy module.  The byte
layout is documented in ``docs/formats.md``.
"""
from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import DuplicateIdentity, EmptyInput, InvalidCredentials, SaltReuse

HASH_SIZE = 32
SALT_SIZE = 16
FIXED_POINT_SCALE = 10**6

_KIND_BYTES = {"user": b"\x01", "service": b"\x02"}


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class PrincipalKind(str, enum.Enum):
    USER = "user"
    SERVICE = "service"


class PriorityClass(str, enum.Enum):
    LOW = "low"
    NORMAL = "normal"
    HIGH = "high"


_PRIORITY_INDEX = {PriorityClass.LOW: 0, PriorityClass.NORMAL: 1, PriorityClass.HIGH: 2}

_REAL_FIELDS = (
    "trust_level",
    "data_sensitivity",
    "resource_availability",
    "access_priority",
    "treatment_urgency",
    "compliance_history",
)


def _pairs(value) -> tuple:
    if isinstance(value, Mapping):
        value = value.items()
    return tuple((str(k), str(v)) for k, v in value)


@dataclass(frozen=True)
class AttributeVector:
    """Attribute vector carried by a user or service provider.

    ``subject_attrs`` and ``object_attrs`` accept a mapping or an iterable of
    ``(name, value)`` pairs; they are stored as tuples of string pairs.
    """

    subject_attrs: tuple = ()
    object_attrs: tuple = ()
    trust_level: float = 0.5
    priority_class: PriorityClass = PriorityClass.NORMAL
    data_sensitivity: float = 0.5
    resource_availability: float = 0.5
    access_priority: float = 0.5
    treatment_urgency: float = 0.5
    compliance_history: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "subject_attrs", _pairs(self.subject_attrs))
        object.__setattr__(self, "object_attrs", _pairs(self.object_attrs))
        object.__setattr__(self, "priority_class", PriorityClass(self.priority_class))

    def validate(self, registrable: bool = True) -> None:
        for name in _REAL_FIELDS:
            x = getattr(self, name)
            if not isinstance(x, (int, float)) or not 0.0 <= x <= 1.0:
                raise InvalidCredentials(f"{name}={x!r} outside [0, 1]")
        if registrable and not (self.subject_attrs and self.object_attrs):
            raise InvalidCredentials("subject and object attributes must be non-empty")

    def raw_values(self) -> list[str]:
        return [v for _, v in self.subject_attrs + self.object_attrs]


@dataclass(frozen=True)
class Credentials:
    id: str
    kind: PrincipalKind
    attrs: AttributeVector = field(default_factory=AttributeVector)

    def __post_init__(self):
        object.__setattr__(self, "kind", PrincipalKind(self.kind))

    def validate(self) -> None:
        if not self.id:
            raise InvalidCredentials("credentials id must be non-empty")
        self.attrs.validate()


@dataclass(frozen=True)
class ZkIdentity:
    value: bytes
    salt: bytes
    chain_hash: bytes

    def hex(self) -> str:
        return self.value.hex()


def _field(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def fixed_point(x: float) -> bytes:
    return struct.pack(">q", int(round(x * FIXED_POINT_SCALE)))


def pair_digest(name: str, value: str) -> bytes:
    return sha256(name.encode() + b"\x1f" + value.encode())


def canonical_pairs(pairs: Iterable[tuple[str, str]]) -> bytes:
    digests = [pair_digest(k, v) for k, v in sorted(pairs)]
    return struct.pack(">I", len(digests)) + b"".join(digests)


def privacy_transform(c: Credentials) -> bytes:
    """Serialize ``c`` canonically with identifiers replaced by digests."""
    c.validate()
    a = c.attrs
    parts = [
        _field(_KIND_BYTES[c.kind.value]),
        _field(sha256(c.id.encode())),
        _field(canonical_pairs(a.subject_attrs)),
        _field(canonical_pairs(a.object_attrs)),
        _field(fixed_point(a.trust_level)),
        _field(struct.pack(">q", _PRIORITY_INDEX[a.priority_class])),
        _field(fixed_point(a.data_sensitivity)),
        _field(fixed_point(a.resource_availability)),
        _field(fixed_point(a.access_priority)),
        _field(fixed_point(a.treatment_urgency)),
        _field(fixed_point(a.compliance_history)),
    ]
    return b"".join(parts)


def derive_chain_hash(p: bytes) -> bytes:
    if not p:
        raise EmptyInput("privacy-preserved data is empty")
    return sha256(p)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def derive_zk_identity(chain_hash: bytes, salt: bytes, registry: "Registry | None" = None) -> ZkIdentity:
    """Hash the chain hash XOR the right-zero-padded salt.

    When ``registry`` is given the salt is checked for freshness and then
    reserved in that registry.
    """
    if len(chain_hash) != HASH_SIZE or len(salt) != SALT_SIZE:
        raise ValueError("chain hash must be 32 bytes and salt 16 bytes")
    if registry is not None:
        if salt in registry.used_salts:
            raise SaltReuse(f"salt {salt.hex()} already used in {registry.kind.value} registry")
        registry.used_salts.add(salt)
    padded = salt + bytes(HASH_SIZE - SALT_SIZE)
    return ZkIdentity(sha256(xor_bytes(chain_hash, padded)), salt, chain_hash)


class Registry:
    """Append-only map from zk-identity value to stored record hash."""

    def __init__(self, kind):
        self.kind = PrincipalKind(kind)
        self.entries: dict[bytes, bytes] = {}
        self.used_salts: set[bytes] = set()

    def insert(self, zk_id: ZkIdentity | bytes, record_hash: bytes) -> "Registry":
        key = zk_id.value if isinstance(zk_id, ZkIdentity) else zk_id
        if key in self.entries:
            raise DuplicateIdentity(key.hex())
        self.entries[key] = record_hash
        return self

    def get(self, key: bytes) -> bytes | None:
        return self.entries.get(key)

    def __contains__(self, key) -> bool:
        if isinstance(key, ZkIdentity):
            key = key.value
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return list(self.entries.items())
