"""Access control hub: registration, request handling, tokens and audit.

The hub wires the other modules together.  A request flows through
``handle_access_request`` (identity lookup and proof re-verification),
``evaluate`` (fuzzy inference), ``issue_token`` for non-deny tiers, and
``contract_decide``, which logs the outcome on the ledger.  ``process_request``
runs the whole flow and always ends in exactly one audit record.

Every method that consumes simulated time takes a ``clock``; by default it is
the ledger's scheduler, and the benchmark passes a per-request
:class:`~flacsim.ledger.LocalClock` instead.
"""
from __future__ import annotations

import enum
import json
import random
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import fuzzy
from .errors import (
    AlreadyRevoked,
    DenyDecision,
    ServiceProviderVerificationFailed,
    TokenExpired,
    UnknownIdentity,
    UnknownToken,
    UserVerificationFailed,
    VerificationFailed,
)
from .identity import (
    Credentials,
    PrincipalKind,
    Registry,
    ZkIdentity,
    canonical_pairs,
    derive_chain_hash,
    derive_zk_identity,
    privacy_transform,
    sha256,
)
from .ledger import Ledger, LedgerRecord, RecordKind, micros
from .proofsys import ProofSystem, VerificationOutcome, ZkProof, final_verification, opens_to
from .rng import random_bytes

DEFAULT_TOKEN_TTL_MS = 5 * 60 * 1000.0
ACTIVITY_WINDOW_MS = 60_000.0
ACTIVITY_SATURATION = 10
EXPERIENCE_SATURATION = 20


@dataclass(frozen=True)
class AccessRequest:
    request_id: str
    user_zk_id: bytes
    service_zk_id: bytes
    requested_data: str
    requested_action: frozenset
    submitted_at: float = 0.0
    # request context; activity and experience default to the hub's history
    patient_condition: float = 0.5
    user_activity_level: float | None = None
    user_experience_level: float | None = None

    def __post_init__(self):
        action = frozenset(self.requested_action)
        object.__setattr__(self, "requested_action", action)
        if not action:
            raise ValueError("requested_action must be non-empty")
        if not action <= fuzzy.ALL_PERMISSIONS:
            raise ValueError(f"unknown actions {sorted(action - fuzzy.ALL_PERMISSIONS)}")

    def canonical(self) -> bytes:
        parts = (
            self.request_id.encode(),
            self.user_zk_id,
            self.service_zk_id,
            self.requested_data.encode(),
            ",".join(sorted(self.requested_action)).encode(),
            struct.pack(">q", micros(self.submitted_at)),
        )
        return b"".join(struct.pack(">I", len(p)) + p for p in parts)


@dataclass(frozen=True)
class CapabilityToken:
    digest: bytes
    signature: bytes
    issued_at: float
    permissions: frozenset
    expiry: float
    request_id: str = ""

    @property
    def token_id(self) -> bytes:
        return self.digest


class Decision(str, enum.Enum):
    GRANTED = "granted"
    DENIED = "denied"


class LoggingStatus(str, enum.Enum):
    PENDING = "pending"
    COMMITTED = "committed"


@dataclass
class AuditRecord:
    request_id: str
    decision: Decision | None = None
    access_compliance: bool = False
    logging_status: LoggingStatus = LoggingStatus.PENDING
    reason: str = ""
    doa: float | None = None
    tier: str | None = None
    fired_rules: tuple = ()
    token_id: bytes | None = None
    submitted_at: float = 0.0
    decided_at: float | None = None
    committed_at: float | None = None
    record: LedgerRecord | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "request_id": self.request_id,
                "decision": self.decision.value if self.decision else None,
                "doa": self.doa,
                "tier": self.tier,
                "fired_rules": [[rid, s] for rid, s in self.fired_rules],
                "access_compliance": self.access_compliance,
                "logging_status": self.logging_status.value,
                "reason": self.reason,
                "token_id": self.token_id.hex() if self.token_id else None,
                "submitted_at": self.submitted_at,
                "decided_at": self.decided_at,
                "committed_at": self.committed_at,
            },
            sort_keys=True,
        )


@dataclass
class Principal:
    credentials: Credentials
    proof: ZkProof
    zk_id: ZkIdentity


@dataclass
class Notification:
    recipient: str
    request_id: str
    message: str


class Hub:
    def __init__(
        self,
        ledger: Ledger,
        proofs: ProofSystem,
        rng: random.Random,
        token_ttl_ms: float = DEFAULT_TOKEN_TTL_MS,
        rule_base: fuzzy.RuleBase = fuzzy.DEFAULT_RULE_BASE,
        forward_to_ledger: bool = False,
    ):
        if token_ttl_ms <= 0:
            raise ValueError("token_ttl_ms must be positive")
        self.ledger = ledger
        self.proofs = proofs
        self.rng = rng
        self.token_ttl_ms = token_ttl_ms
        self.rule_base = rule_base
        self.forward_to_ledger = forward_to_ledger
        self.kp, self.vk = proofs.keygen()
        self._signing_key = Ed25519PrivateKey.from_private_bytes(random_bytes(rng, 32))
        self.public_key = self._signing_key.public_key()
        self.registries = {kind: Registry(kind) for kind in PrincipalKind}
        self.principals: dict[bytes, Principal] = {}
        self.audit: dict[str, AuditRecord] = {}
        self.tokens: dict[bytes, CapabilityToken] = {}
        self.revoked: set[bytes] = set()
        self.notifications: list[Notification] = []
        self.contract_delays: list[float] = []
        self.flacm_calls = 0
        self._activity: dict[bytes, deque] = {}
        self._grants: dict[bytes, int] = {}
        self._token_audit: dict[bytes, AuditRecord] = {}
        self._pending: dict[LedgerRecord, AuditRecord] = {}
        ledger.listeners.append(self._on_commit)

    @property
    def clock(self):
        return self.ledger.scheduler

    # -- registration --------------------------------------------------------

    def register(self, c: Credentials, proof: ZkProof | None = None, clock=None) -> ZkIdentity:
        """Prove, verify and store a principal; nothing is written on failure."""
        clock = self.clock if clock is None else clock
        c.validate()
        if proof is None:
            proof = self.proofs.prove(c, self.kp)
        ok = self.proofs.verify(proof, self.vk, clock) and opens_to(proof, c)
        if not ok:
            is_service = c.kind is PrincipalKind.SERVICE
            outcome = final_verification(not is_service, is_service)
            exc = ServiceProviderVerificationFailed if is_service else UserVerificationFailed
            err = exc(f"{outcome.value}: proof for {c.kind.value} did not verify")
            err.outcome = outcome
            raise err
        chain_hash = derive_chain_hash(privacy_transform(c))
        registry = self.registries[c.kind]
        salt = random_bytes(self.rng, 16)
        while salt in registry.used_salts:
            salt = random_bytes(self.rng, 16)
        zk = derive_zk_identity(chain_hash, salt, registry)
        record_hash = sha256(zk.value + chain_hash)
        kind = RecordKind.REGISTRATION_SERVICE if c.kind is PrincipalKind.SERVICE else RecordKind.REGISTRATION_USER
        self.ledger.submit(LedgerRecord(kind, record_hash, clock.now), at=clock.now)
        registry.insert(zk, record_hash)
        self.principals[zk.value] = Principal(c, proof, zk)
        return zk

    def register_service(self, c: Credentials, **kw) -> ZkIdentity:
        if c.kind is not PrincipalKind.SERVICE:
            raise ValueError("expected service credentials")
        return self.register(c, **kw)

    def register_user(self, c: Credentials, **kw) -> ZkIdentity:
        if c.kind is not PrincipalKind.USER:
            raise ValueError("expected user credentials")
        return self.register(c, **kw)

    def register_pair(self, cs: Credentials, cu: Credentials, clock=None):
        """Register a service provider then a user, reporting the combined outcome.

        Returns ``(outcome, service_zk, user_zk)``; identities are ``None`` for
        the parties that were not stored.
        """
        try:
            zs = self.register_service(cs, clock=clock)
        except ServiceProviderVerificationFailed:
            return final_verification(False, True), None, None
        try:
            zu = self.register_user(cu, clock=clock)
        except UserVerificationFailed:
            return VerificationOutcome.USER_VERIFICATION_FAILED, zs, None
        return VerificationOutcome.SUCCESS, zs, zu

    # -- request handling ----------------------------------------------------

    def _principal(self, zk_value: bytes, kind: PrincipalKind) -> Principal | None:
        if zk_value not in self.registries[kind]:
            return None
        return self.principals.get(zk_value)

    def _open_audit(self, req: AccessRequest) -> AuditRecord:
        if req.request_id in self.audit:
            raise ValueError(f"duplicate request id {req.request_id!r}")
        audit = AuditRecord(req.request_id, submitted_at=req.submitted_at)
        self.audit[req.request_id] = audit
        return audit

    def handle_access_request(self, req: AccessRequest, clock=None) -> fuzzy.FuzzyInput:
        """Resolve and re-verify both parties, then assemble the fuzzy input."""
        clock = self.clock if clock is None else clock
        audit = self._open_audit(req)
        user = self._principal(req.user_zk_id, PrincipalKind.USER)
        service = self._principal(req.service_zk_id, PrincipalKind.SERVICE)
        if user is None or service is None:
            which = "user" if user is None else "service"
            self._deny(req, audit, f"unknown {which} identity", clock)
            raise UnknownIdentity(f"{which} zk-identity not registered")
        vs = self.proofs.verify(service.proof, self.vk, clock) and opens_to(service.proof, service.credentials)
        vu = self.proofs.verify(user.proof, self.vk, clock) and opens_to(user.proof, user.credentials)
        outcome = final_verification(vs, vu)
        if outcome is not VerificationOutcome.SUCCESS:
            self._deny(req, audit, outcome.value, clock)
            raise VerificationFailed(outcome.value)
        if self.forward_to_ledger:
            digest = sha256(b"forward" + req.canonical())
            self.ledger.submit(LedgerRecord(RecordKind.ACCESS_FORWARDED, digest, clock.now), at=clock.now)
        return self._fuzzy_input(req, user, service, clock.now)

    def _fuzzy_input(self, req, user, service, now) -> fuzzy.FuzzyInput:
        ua, sa = user.credentials.attrs, service.credentials.attrs
        history = self._activity.setdefault(req.user_zk_id, deque())
        while history and history[0] < now - ACTIVITY_WINDOW_MS:
            history.popleft()
        history.append(now)
        activity = req.user_activity_level
        if activity is None:
            activity = min(1.0, (len(history) - 1) / ACTIVITY_SATURATION)
        experience = req.user_experience_level
        if experience is None:
            experience = min(1.0, self._grants.get(req.user_zk_id, 0) / EXPERIENCE_SATURATION)
        return fuzzy.FuzzyInput(
            data_sensitivity=sa.data_sensitivity,
            trust_level=ua.trust_level,
            user_activity_level=activity,
            patient_condition=req.patient_condition,
            resource_availability=sa.resource_availability,
            access_priority=ua.access_priority,
            treatment_urgency=sa.treatment_urgency,
            compliance_history=ua.compliance_history,
            user_experience_level=experience,
        )

    def evaluate(self, req: AccessRequest, inp: fuzzy.FuzzyInput) -> fuzzy.AccessDecision:
        self.flacm_calls += 1
        user = self.principals.get(req.user_zk_id)
        sa = user.credentials.attrs.subject_attrs if user else None
        return fuzzy.infer_doa(inp, self.rule_base, subject_attrs=sa)

    # -- tokens ----------------------------------------------------------------

    def issue_token(self, req: AccessRequest, decision: fuzzy.AccessDecision, now: float) -> CapabilityToken:
        if decision.tier == fuzzy.Tier.DENY:
            raise DenyDecision(f"request {req.request_id} was denied; no token")
        user = self._principal(req.user_zk_id, PrincipalKind.USER)
        if user is None:
            raise UnknownIdentity("user zk-identity not registered")
        digest = token_digest(user.credentials.attrs.subject_attrs, req, now)
        token = CapabilityToken(
            digest=digest,
            signature=self._signing_key.sign(digest),
            issued_at=now,
            permissions=decision.permissions,
            expiry=now + self.token_ttl_ms,
            request_id=req.request_id,
        )
        self.tokens[digest] = token
        return token

    def verify_signature(self, token: CapabilityToken) -> bool:
        try:
            self.public_key.verify(token.signature, token.digest)
        except InvalidSignature:
            return False
        return True

    def use_token(self, token: CapabilityToken | bytes, now: float | None = None) -> bool:
        """Access-compliance check at use time; the result is written to the audit."""
        now = self.clock.now if now is None else now
        token_id = token if isinstance(token, bytes) else token.digest
        stored = self.tokens.get(token_id)
        ok = (
            stored is not None
            and (isinstance(token, bytes) or token == stored)
            and self.verify_signature(stored)
            and token_id not in self.revoked
            and now < stored.expiry
        )
        audit = self._token_audit.get(token_id)
        if audit is not None:
            audit.access_compliance = ok
        return ok

    def revoke(self, token_id: bytes, clock=None) -> AuditRecord:
        clock = self.clock if clock is None else clock
        token = self.tokens.get(token_id)
        if token is None:
            raise UnknownToken(token_id.hex())
        if token_id in self.revoked:
            raise AlreadyRevoked(token_id.hex())
        if clock.now >= token.expiry:
            raise TokenExpired(token_id.hex())
        self.revoked.add(token_id)
        digest = sha256(b"revoke" + token_id + struct.pack(">q", micros(clock.now)))
        self.ledger.submit(LedgerRecord(RecordKind.TOKEN_REVOKED, digest, clock.now, token_id), at=clock.now)
        audit = self._token_audit[token_id]
        audit.access_compliance = False
        audit.reason = "token revoked"
        return audit

    # -- decision ----------------------------------------------------------------

    def contract_decide(self, req: AccessRequest, decision: fuzzy.AccessDecision,
                        token: CapabilityToken | None = None, clock=None) -> AuditRecord:
        """Smart-contract gate: grant iff DoA > 0 and the tier is not Deny."""
        clock = self.clock if clock is None else clock
        audit = self.audit.get(req.request_id) or self._open_audit(req)
        d = self.rng.uniform(*self.ledger.config.contract_exec_ms)
        self.contract_delays.append(d)
        clock.advance(d)
        audit.doa = decision.doa
        audit.tier = decision.tier.label
        audit.fired_rules = decision.fired_rules
        if decision.doa > 0 and decision.tier != fuzzy.Tier.DENY:
            if token is None:
                token = self.issue_token(req, decision, clock.now)
            record = self.ledger.log_access(True, token.digest, clock.now, req.request_id)
            audit.decision = Decision.GRANTED
            audit.token_id = token.digest
            audit.access_compliance = self.verify_signature(token)
            audit.reason = f"granted {decision.tier.label}"
            self._token_audit[token.digest] = audit
            self._grants[req.user_zk_id] = self._grants.get(req.user_zk_id, 0) + 1
            self.notifications.append(Notification("service", req.request_id, f"access rights {sorted(token.permissions)} delegated"))
            self._log(audit, record, clock.now)
        else:
            self._deny(req, audit, f"degree of access {decision.doa:.3f} maps to {decision.tier.label}", clock)
        return audit

    def _deny(self, req: AccessRequest, audit: AuditRecord, reason: str, clock) -> None:
        record = self.ledger.log_access(False, None, clock.now, req.request_id)
        audit.decision = Decision.DENIED
        audit.access_compliance = False
        audit.reason = reason
        self.notifications.append(Notification("user", req.request_id, f"access denied: {reason}"))
        self._log(audit, record, clock.now)

    def _log(self, audit: AuditRecord, record: LedgerRecord, now: float) -> None:
        audit.decided_at = now
        audit.record = record
        self._pending[record] = audit
        self.ledger.submit(record, at=now)

    def process_request(self, req: AccessRequest, clock=None) -> AuditRecord:
        """Run one request end to end; failures become denied audit records."""
        clock = self.clock if clock is None else clock
        try:
            inp = self.handle_access_request(req, clock)
        except (UnknownIdentity, VerificationFailed):
            return self.audit[req.request_id]
        decision = self.evaluate(req, inp)
        token = None
        if decision.tier != fuzzy.Tier.DENY and decision.doa > 0:
            token = self.issue_token(req, decision, clock.now)
        return self.contract_decide(req, decision, token, clock)

    def _on_commit(self, block) -> None:
        for record in block.records:
            audit = self._pending.pop(record, None)
            if audit is not None:
                audit.logging_status = LoggingStatus.COMMITTED
                audit.committed_at = block.commit_time

    def export_audit(self, path) -> None:
        lines = [a.to_json() for a in self.audit.values()]
        Path(path).write_text("".join(line + "\n" for line in lines))


def token_digest(subject_attrs, req: AccessRequest, now: float) -> bytes:
    return sha256(
        canonical_pairs(subject_attrs)
        + req.service_zk_id
        + req.user_zk_id
        + req.canonical()
        + struct.pack(">q", micros(now))
    )
