"""Hash-chained ledger, consensus timing engines and the event scheduler.

Blocks are cut from a FIFO mempool when ``block_size`` records are waiting or
``batch_timeout_ms`` has elapsed since the batch opened.  A cut block passes
through the stages of the configured engine, each modelled as a FIFO server
whose service time is ``block cost + per-record cost * n``:

* Solo: one orderer.
* Raft: the leader appends, ships the entry to every live follower over a
  simulated link, and the block is ordered once a majority (leader included)
  has appended it.
* SoloRaft: the Solo orderer followed by the Raft replication stage.

Every engine then delivers the block to the committing peer, which validates
it serially.  Stage completion times are computed when the block is cut; the
block joins the chain through a scheduled commit event.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import random
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigInvalid, EmptyBatch, NoQuorum, QueueFull
from .identity import HASH_SIZE, sha256, xor_bytes

ZERO_HASH = bytes(HASH_SIZE)


class RecordKind(str, enum.Enum):
    REGISTRATION_SERVICE = "RegistrationService"
    REGISTRATION_USER = "RegistrationUser"
    ACCESS_GRANTED = "AccessGranted"
    ACCESS_DENIED = "AccessDenied"
    ACCESS_FORWARDED = "AccessForwarded"
    TOKEN_REVOKED = "TokenRevoked"
    DATA_ANCHOR = "DataAnchor"


_KIND_CODE = {kind: i + 1 for i, kind in enumerate(RecordKind)}


def micros(ms: float) -> int:
    return int(round(ms * 1000))


@dataclass(frozen=True)
class LedgerRecord:
    kind: RecordKind
    payload_hash: bytes
    timestamp: float
    token_id: bytes | None = None
    size_bytes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", RecordKind(self.kind))
        if len(self.payload_hash) != HASH_SIZE or not any(self.payload_hash):
            raise ValueError("payload_hash must be a nonzero 32-byte digest")
        if self.token_id is not None and len(self.token_id) != HASH_SIZE:
            raise ValueError("token_id must be a 32-byte digest")

    def encode(self) -> bytes:
        token = b"\x01" + self.token_id if self.token_id is not None else b"\x00"
        return (
            bytes([_KIND_CODE[self.kind]])
            + self.payload_hash
            + struct.pack(">q", micros(self.timestamp))
            + token
            + struct.pack(">I", self.size_bytes)
        )


def canonical_records(records) -> bytes:
    return struct.pack(">I", len(records)) + b"".join(r.encode() for r in records)


def block_hash(prev_hash: bytes, records, height: int) -> bytes:
    return sha256(prev_hash + canonical_records(records) + struct.pack(">Q", height))


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    records: tuple
    block_hash: bytes
    commit_time: float

    def recompute(self) -> bytes:
        return block_hash(self.prev_hash, self.records, self.height)


GENESIS = Block(0, ZERO_HASH, (), block_hash(ZERO_HASH, (), 0), 0.0)


def decision_payload(granted: bool, request_id: str = "", token_id: bytes | None = None) -> bytes:
    label = (RecordKind.ACCESS_GRANTED if granted else RecordKind.ACCESS_DENIED).value.encode()
    parts = (label, request_id.encode(), token_id or b"")
    return b"".join(struct.pack(">I", len(p)) + p for p in parts)


def timestamp_pad(now: float) -> bytes:
    return bytes(HASH_SIZE - 8) + struct.pack(">Q", micros(now))


def log_access(granted: bool, token_id: bytes | None, now: float, request_id: str = "") -> tuple[LedgerRecord, bytes]:
    """Build the audit record for a decision.

    The on-chain digest is ``H(payload) XOR timestamp`` with the microsecond
    timestamp right-aligned in 32 zero bytes.  The raw payload is returned too
    so callers can keep it off-chain for audit queries.
    """
    payload = decision_payload(granted, request_id, token_id)
    kind = RecordKind.ACCESS_GRANTED if granted else RecordKind.ACCESS_DENIED
    digest = xor_bytes(sha256(payload), timestamp_pad(now))
    return LedgerRecord(kind, digest, now, token_id), payload


# -- simulated time -------------------------------------------------------


class Scheduler:
    """Deterministic event queue ordered by ``(time, sequence)``.

    Also usable as a clock: ``advance(ms)`` dispatches every event due before
    the new time and then moves ``now`` forward.
    """

    def __init__(self, start: float = 0.0):
        self.now = start
        self._queue: list = []
        self._seq = itertools.count()

    def schedule_at(self, when: float, fn, *args) -> None:
        if when < self.now:
            raise ValueError(f"cannot schedule at {when} before now={self.now}")
        heapq.heappush(self._queue, (when, next(self._seq), fn, args))

    def schedule(self, delay: float, fn, *args) -> None:
        self.schedule_at(self.now + delay, fn, *args)

    def step(self) -> bool:
        if not self._queue:
            return False
        when, _, fn, args = heapq.heappop(self._queue)
        self.now = when
        fn(*args)
        return True

    def run(self, until: float | None = None) -> None:
        while self._queue and (until is None or self._queue[0][0] <= until):
            self.step()
        if until is not None and until > self.now:
            self.now = until

    def advance(self, delay: float) -> None:
        self.run(self.now + delay)

    def __len__(self) -> int:
        return len(self._queue)


class LocalClock:
    """Private time cursor for one request flowing through infinite-server stages."""

    def __init__(self, now: float = 0.0):
        self.now = now

    def advance(self, delay: float) -> None:
        self.now += delay


# -- consensus ------------------------------------------------------------


class Engine(str, enum.Enum):
    SOLO = "Solo"
    RAFT = "Raft"
    SOLO_RAFT = "SoloRaft"

    @classmethod
    def parse(cls, text) -> "Engine":
        if isinstance(text, Engine):
            return text
        key = str(text).replace("-", "").replace("_", "").replace(" ", "").lower()
        for e in cls:
            if e.value.lower() == key:
                return e
        raise ConfigInvalid(f"unknown consensus engine {text!r}")


def _interval(value, name) -> tuple[float, float]:
    lo, hi = (float(v) for v in value)
    if lo < 0 or lo > hi:
        raise ConfigInvalid(f"{name} interval {value} must satisfy 0 <= min <= max")
    return lo, hi


@dataclass
class ConsensusConfig:
    engine: Engine = Engine.SOLO
    node_count: int = 10
    block_size: int = 100
    batch_timeout_ms: float = 200.0
    per_hop_ms: tuple = (5.0, 20.0)
    contract_exec_ms: tuple = (5.0, 15.0)
    mempool_limit: int = 1_000_000
    block_interval_ms: float = 0.0
    orderer_block_ms: float = 5.0
    orderer_tx_ms: float = 0.1
    raft_block_ms: float = 5.0
    raft_tx_ms: float = 0.1
    validate_block_ms: float = 10.0
    validate_tx_ms: float = 0.2
    failed_followers: int = 0

    def __post_init__(self):
        self.engine = Engine.parse(self.engine)
        self.per_hop_ms = _interval(self.per_hop_ms, "per_hop_ms")
        self.contract_exec_ms = _interval(self.contract_exec_ms, "contract_exec_ms")
        if not 10 <= self.node_count <= 40:
            raise ConfigInvalid(f"node_count {self.node_count} outside [10, 40]")
        if self.engine is not Engine.SOLO and self.node_count < 3:
            raise ConfigInvalid("Raft engines need at least 3 nodes")
        if self.block_size < 1 or self.mempool_limit < 1:
            raise ConfigInvalid("block_size and mempool_limit must be positive")
        if self.batch_timeout_ms <= 0:
            raise ConfigInvalid("batch_timeout_ms must be positive")
        if not 0 <= self.failed_followers < self.node_count:
            raise ConfigInvalid("failed_followers must lie in [0, node_count)")
        for name in ("block_interval_ms", "orderer_block_ms", "orderer_tx_ms", "raft_block_ms",
                     "raft_tx_ms", "validate_block_ms", "validate_tx_ms"):
            if getattr(self, name) < 0:
                raise ConfigInvalid(f"{name} must be non-negative")

    @property
    def quorum_followers(self) -> int:
        """Follower acks needed for a majority that counts the leader."""
        return self.node_count // 2


@dataclass(frozen=True)
class Receipt:
    sequence: int
    position: int


class Ledger:
    """Append-only chain fed by a batching mempool and a consensus engine."""

    def __init__(self, config: ConsensusConfig, scheduler: Scheduler | None = None,
                 rng: random.Random | None = None):
        self.config = config
        self.scheduler = scheduler if scheduler is not None else Scheduler()
        self.rng = rng if rng is not None else random.Random(0)
        self.chain: list[Block] = [GENESIS]
        self.mempool: deque = deque()
        self.offchain: dict[bytes, bytes] = {}
        self.submitted: list[LedgerRecord] = []
        self.rejected: list[LedgerRecord] = []
        self.listeners: list = []
        self._seq = itertools.count()
        self._tip_hash = GENESIS.block_hash
        self._next_height = 1
        self._timer_token = 0
        self._timer_armed = False
        self._next_cut_allowed = float("-inf")
        self._retry_armed = False
        self._orderer_free = 0.0
        self._leader_free = 0.0
        self._validator_free = 0.0
        self._follower_free = [0.0] * (config.node_count - 1)

    # -- submission --------------------------------------------------------

    def submit(self, record: LedgerRecord, at: float | None = None) -> Receipt | None:
        """Queue ``record``; a future ``at`` defers entry to that simulated time.

        Deferred records that find the mempool full land in ``rejected``.
        """
        if at is not None and at > self.scheduler.now:
            self.scheduler.schedule_at(at, self._deferred, record)
            return None
        return self._enqueue(record)

    def _deferred(self, record):
        try:
            self._enqueue(record)
        except QueueFull:
            self.rejected.append(record)

    def _enqueue(self, record: LedgerRecord) -> Receipt:
        if len(self.mempool) >= self.config.mempool_limit:
            raise QueueFull(f"mempool holds {len(self.mempool)} records")
        self.mempool.append(record)
        self.submitted.append(record)
        receipt = Receipt(next(self._seq), len(self.mempool) - 1)
        if not self._timer_armed:
            self._arm_timer()
        if len(self.mempool) >= self.config.block_size:
            self._cut_ready(by_timeout=False)
        return receipt

    def _arm_timer(self):
        self._timer_token += 1
        self._timer_armed = True
        self.scheduler.schedule(self.config.batch_timeout_ms, self._on_timeout, self._timer_token)

    def _on_timeout(self, token):
        if token != self._timer_token:
            return
        self._timer_armed = False
        if self.mempool:
            self._cut_ready(by_timeout=True)

    def _cut_ready(self, by_timeout: bool):
        cfg = self.config
        while self.mempool and (by_timeout or len(self.mempool) >= cfg.block_size):
            if self.scheduler.now < self._next_cut_allowed:
                if not self._retry_armed:
                    self._retry_armed = True
                    self.scheduler.schedule_at(self._next_cut_allowed, self._retry_cut)
                return
            self._cut(min(cfg.block_size, len(self.mempool)))
            by_timeout = False
            # records left over start a fresh batch window
            self._timer_armed = False
            self._timer_token += 1
            if self.mempool:
                self._arm_timer()

    def _retry_cut(self):
        self._retry_armed = False
        if self.mempool:
            self._cut_ready(by_timeout=not self._timer_armed or len(self.mempool) >= self.config.block_size)

    # -- consensus ---------------------------------------------------------

    def commit_block(self) -> Block:
        """Cut the pending batch now and run it through consensus."""
        if not self.mempool:
            raise EmptyBatch("no pending records")
        block = self._cut(min(self.config.block_size, len(self.mempool)))
        self._timer_armed = False
        self._timer_token += 1
        if self.mempool:
            self._arm_timer()
        return block

    def flush(self) -> None:
        """Cut every pending record and dispatch all scheduled events."""
        self.scheduler.run()
        while self.mempool:
            self.commit_block()
            self.scheduler.run()

    def _hop(self) -> float:
        return self.rng.uniform(*self.config.per_hop_ms)

    def _solo_stage(self, t: float, n: int) -> float:
        cfg = self.config
        start = max(t, self._orderer_free)
        self._orderer_free = start + cfg.orderer_block_ms + cfg.orderer_tx_ms * n
        return self._orderer_free

    def _raft_stage(self, t: float, n: int) -> float:
        cfg = self.config
        cost = cfg.raft_block_ms + cfg.raft_tx_ms * n
        start = max(t, self._leader_free)
        self._leader_free = start + cost
        acks = []
        live = len(self._follower_free) - cfg.failed_followers
        for i in range(live):
            arrive = self._leader_free + self._hop()
            done = max(arrive, self._follower_free[i]) + cost
            self._follower_free[i] = done
            acks.append(done + self._hop())
        acks.sort()
        return acks[cfg.quorum_followers - 1]

    def _cut(self, n: int) -> Block:
        cfg = self.config
        live = cfg.node_count - 1 - cfg.failed_followers
        if cfg.engine is not Engine.SOLO and live < cfg.quorum_followers:
            raise NoQuorum(f"{live} live followers, need {cfg.quorum_followers}")
        records = tuple(self.mempool.popleft() for _ in range(n))
        t = self.scheduler.now
        if cfg.engine is Engine.SOLO:
            ready = self._solo_stage(t, n)
        elif cfg.engine is Engine.RAFT:
            ready = self._raft_stage(t, n)
        else:
            ready = self._raft_stage(self._solo_stage(t, n), n)
        arrive = ready + self._hop()
        start = max(arrive, self._validator_free)
        self._validator_free = start + cfg.validate_block_ms + cfg.validate_tx_ms * n
        commit_time = self._validator_free
        height = self._next_height
        block = Block(height, self._tip_hash, records, block_hash(self._tip_hash, records, height), commit_time)
        self._tip_hash = block.block_hash
        self._next_height += 1
        if cfg.block_interval_ms > 0:
            self._next_cut_allowed = commit_time + cfg.block_interval_ms
        self.scheduler.schedule_at(commit_time, self._append, block)
        return block

    def _append(self, block: Block) -> None:
        self.chain.append(block)
        for fn in self.listeners:
            fn(block)

    # -- audit -------------------------------------------------------------

    def log_access(self, granted: bool, token_id: bytes | None, now: float, request_id: str = "") -> LedgerRecord:
        record, payload = log_access(granted, token_id, now, request_id)
        self.offchain[record.payload_hash] = payload
        return record

    def audit_payload(self, record: LedgerRecord) -> bytes | None:
        """Return the off-chain payload if it still matches the on-chain digest."""
        payload = self.offchain.get(record.payload_hash)
        if payload is None:
            return None
        if xor_bytes(sha256(payload), timestamp_pad(record.timestamp)) != record.payload_hash:
            return None
        return payload

    # -- inspection --------------------------------------------------------

    @property
    def height(self) -> int:
        return self.chain[-1].height

    def committed_records(self):
        for block in self.chain:
            yield from block.records

    def verify_chain(self) -> bool:
        return verify_chain(self.chain)

    def export_chain(self, path) -> None:
        Path(path).write_text(chain_export_text(self.chain))


def verify_chain(chain) -> bool:
    if not chain or chain[0].prev_hash != ZERO_HASH or chain[0].height != 0:
        return False
    prev = None
    for block in chain:
        if block.recompute() != block.block_hash:
            return False
        if prev is not None and (block.prev_hash != prev.block_hash or block.height != prev.height + 1):
            return False
        prev = block
    return True


def chain_export_text(chain) -> str:
    lines = [
        f"{b.height},{b.prev_hash.hex()},{b.block_hash.hex()},{len(b.records)},{b.commit_time:.6f}"
        for b in chain
    ]
    return "\n".join(lines) + "\n"
