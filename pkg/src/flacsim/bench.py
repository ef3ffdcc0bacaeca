"""Workload generation, sweeps, metrics and comparison with reference tables.

One sweep step is one independent discrete-event simulation: a population of
services and users registers during a warm-up phase, then requests arrive at
``send_rate`` for ``duration_s`` simulated seconds.  Transactional requests run
the full hub flow and are timed until their audit record commits (plus the
hop back to the client).  Read requests present a previously issued token to
a pool of read servers with a bounded FIFO queue.

Throughput follows the usual blockchain-benchmark convention: committed
transactions divided by the time from the first submission to the last
commit.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import ConfigInvalid, GridMismatch, IoFailure, QueueFull
from .hub import AccessRequest, Decision, Hub
from .identity import AttributeVector, Credentials, PrincipalKind, sha256
from .ledger import Ledger, LedgerRecord, LocalClock, RecordKind, Scheduler, chain_export_text
from .presets import Preset
from .proofsys import ProofSystem
from .rng import derive_rng, derive_seed

CSV_COLUMNS = (
    "send_rate", "n", "mean_latency_ms", "throughput_tps", "read_latency_ms",
    "read_throughput_tps", "engine", "seed", "block_size",
)
SAMPLE_COLUMNS = ("send_rate", "block_size", "index", "latency_ms")
# requests still in flight when sending stops reach the mempool within this delay
ALIGN_DELAY_MS = 1000.0

_DEPARTMENTS = ("cardiology", "oncology", "radiology", "emergency", "pediatrics")
_ROLES = ("physician", "nurse", "pharmacist", "researcher", "technician")


@dataclass(frozen=True)
class Workload:
    send_rate: float
    duration_s: float = 10.0
    tx_size: tuple = (1024, 5120)
    mix: float = 0.0
    seed: int = 0
    arrival: str = "fixed"
    block_size: int | None = None

    def __post_init__(self):
        if not self.send_rate > 0:
            raise ConfigInvalid("send_rate must be positive")
        lo, hi = self.tx_size
        if not 1024 <= lo <= hi <= 5120:
            raise ConfigInvalid(f"tx_size {self.tx_size} outside [1024, 5120]")
        if not 0.0 <= self.mix <= 1.0:
            raise ConfigInvalid("mix must lie in [0, 1]")
        if self.duration_s < 0:
            raise ConfigInvalid("duration_s must be non-negative")
        if self.block_size is not None and self.block_size < 1:
            raise ConfigInvalid("block_size must be positive")


@dataclass
class MetricsRecord:
    """Aggregates for one sweep step.

    ``n`` counts issued requests; ``samples`` holds one latency per request
    that completed, so ``mean_latency_ms`` is their mean and is ``None`` when
    nothing completed.  ``throughput_tps`` counts ledger transactions, which
    can exceed the request rate; ``request_throughput_tps`` counts requests.
    """

    send_rate: float
    n: int
    mean_latency_ms: float | None
    throughput_tps: float
    read_latency_ms: float | None
    read_throughput_tps: float
    engine: str
    seed: int
    block_size: int
    request_throughput_tps: float = 0.0
    samples: tuple = ()
    read_samples: tuple = ()
    rejected: int = 0
    granted: int = 0
    chain_ok: bool = True
    chain_text: str = field(default="", repr=False)

    @property
    def undefined(self) -> bool:
        return self.mean_latency_ms is None

    def value(self, metric: str):
        return getattr(self, metric)


@dataclass(frozen=True)
class ReferenceCurve:
    source: str
    points: tuple
    tolerance: float = 0.15

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("reference curve needs at least one point")
        xs = [x for x, _ in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("reference points must be strictly increasing in x")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")

    @property
    def xs(self) -> list[float]:
        return [x for x, _ in self.points]

    @property
    def ys(self) -> list[float]:
        return [y for _, y in self.points]


@dataclass(frozen=True)
class PointCheck:
    x: float
    measured: float
    expected: float
    deviation: float
    passed: bool


@dataclass
class ComparisonReport:
    source: str
    tolerance: float
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_deviation(self) -> float:
        return max((abs(c.deviation) for c in self.checks), default=0.0)

    def to_text(self) -> str:
        lines = [f"reference: {self.source} (tolerance {self.tolerance:.0%})"]
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  {mark} x={c.x:g} measured={c.measured:.1f} expected={c.expected:.1f} "
                         f"deviation={c.deviation:+.1%}")
        lines.append(f"max deviation {self.max_deviation:.1%}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


# -- reference data ---------------------------------------------------------


def reference_tables() -> dict:
    text = (resources.files("flacsim") / "data" / "reference_tables.json").read_text()
    return json.loads(text)


def reference_curve(table: str, column: str, tolerance: float = 0.15) -> ReferenceCurve:
    tables = reference_tables()
    if table not in tables:
        raise ConfigInvalid(f"unknown reference table {table!r}")
    t = tables[table]
    if column not in t["columns"]:
        raise ConfigInvalid(f"table {table!r} has no column {column!r}")
    ys = t["columns"][column]
    points = [(x, y) for x, y in zip(t["x"], ys) if y is not None]
    return ReferenceCurve(f"{table} / {column}", tuple(points), tolerance)


def curve_for(preset: Preset) -> ReferenceCurve:
    ref = preset.reference
    if not ref.table:
        raise ConfigInvalid(f"preset {preset.name!r} names no reference table")
    return reference_curve(ref.table, ref.column or preset.consensus.engine.value, ref.tolerance)


# -- simulation -------------------------------------------------------------


def _population(rng, users: int, services: int):
    svc = []
    for i in range(services):
        attrs = AttributeVector(
            subject_attrs={"department": rng.choice(_DEPARTMENTS), "service": f"svc-{i}"},
            object_attrs={"record_type": "ehr", "ward": str(rng.randint(1, 9))},
            data_sensitivity=rng.uniform(0.0, 0.7),
            resource_availability=rng.uniform(0.3, 1.0),
            treatment_urgency=rng.uniform(0.0, 1.0),
        )
        svc.append(Credentials(f"service-{i}", PrincipalKind.SERVICE, attrs))
    usr = []
    for i in range(users):
        attrs = AttributeVector(
            subject_attrs={"role": rng.choice(_ROLES), "user": f"user-{i}"},
            object_attrs={"record_type": "ehr"},
            trust_level=rng.uniform(0.4, 1.0),
            access_priority=rng.uniform(0.0, 1.0),
            compliance_history=rng.uniform(0.4, 1.0),
        )
        usr.append(Credentials(f"user-{i}", PrincipalKind.USER, attrs))
    return svc, usr


def _stochastic_round(rng, x: float) -> int:
    base = math.floor(x)
    return base + (1 if rng.random() < x - base else 0)


class Simulation:
    """One sweep step.  Build it, call :meth:`run`, read the returned record."""

    def __init__(self, preset: Preset, workload: Workload, seed: int):
        self.preset = preset
        self.workload = workload
        self.seed = seed
        cfg = preset.consensus
        if workload.block_size is not None:
            cfg = replace(cfg, block_size=workload.block_size)
        self.config = cfg
        self.scheduler = Scheduler()
        self.ledger = Ledger(cfg, self.scheduler, derive_rng(seed, "ledger"))
        self.proofs = ProofSystem(derive_rng(seed, "proofs"), preset.verify_ms)
        self.hub = Hub(self.ledger, self.proofs, derive_rng(seed, "hub"),
                       token_ttl_ms=preset.token_ttl_ms, forward_to_ledger=preset.forward_to_ledger)
        self.rng = derive_rng(seed, "workload")
        self.t_start = preset.warmup_ms
        self.t_end = self.t_start + workload.duration_s * 1000.0
        self.n_issued = 0
        self._tx: list = []  # (audit, arrival, hop back)
        self._reads: list = []  # (arrival, completion)
        self._read_rejected = 0
        self._servers = [0.0] * preset.reads.workers
        self._read_queue: deque = deque()
        self._tokens: list = []
        self._n_anchor = 0

    def _hop(self) -> float:
        return self.rng.uniform(*self.config.per_hop_ms)

    def _setup(self) -> None:
        services, users = _population(self.rng, self.preset.users, self.preset.services)
        self.services = [self.hub.register(c, clock=LocalClock(0.0)).value for c in services]
        self.users = [self.hub.register(c, clock=LocalClock(0.0)).value for c in users]
        if self.workload.mix > 0:
            # each user asks once for read access; granted tokens serve the read workload
            for i, user in enumerate(self.users):
                req = AccessRequest(f"setup-{i}", user, self.rng.choice(self.services), "ehr",
                                    frozenset({"read"}), submitted_at=0.0, patient_condition=0.1)
                audit = self.hub.process_request(req, LocalClock(0.0))
                if audit.decision is Decision.GRANTED:
                    self._tokens.append(self.hub.tokens[audit.token_id])
            if not self._tokens:
                raise ConfigInvalid("population produced no read tokens")

    def _arrivals(self):
        wl = self.workload
        if wl.arrival == "fixed":
            n = int(round(wl.send_rate * wl.duration_s))
            gap = 1000.0 / wl.send_rate
            return [self.t_start + i * gap for i in range(n)]
        rng = derive_rng(self.seed, "arrivals")
        times, t = [], self.t_start + rng.expovariate(wl.send_rate / 1000.0)
        while t < self.t_end:
            times.append(t)
            t += rng.expovariate(wl.send_rate / 1000.0)
        return times

    def _on_arrival(self, i: int, t: float) -> None:
        wl = self.workload
        size = self.rng.randint(*wl.tx_size)
        if wl.mix > 0 and self.rng.random() < wl.mix:
            token = self.rng.choice(self._tokens)
            self.scheduler.schedule_at(t + self._hop(), self._on_read, t, token)
            return
        clock = LocalClock(t)
        clock.advance(self._hop())
        req = AccessRequest(
            f"q{i}", self.rng.choice(self.users), self.rng.choice(self.services), "ehr",
            frozenset({"read", "write"}), submitted_at=t, patient_condition=self.rng.random(),
        )
        audit = self.hub.process_request(req, clock)
        extra = _stochastic_round(self.rng, self.preset.load.extra_per_request(wl.send_rate))
        for k in range(extra):
            digest = sha256(req.request_id.encode() + k.to_bytes(4, "big"))
            self.ledger.submit(LedgerRecord(RecordKind.ACCESS_FORWARDED, digest, clock.now, size_bytes=size),
                               at=clock.now)
        self._tx.append((audit, t, self._hop()))

    def _on_read(self, arrival: float, token) -> None:
        now = self.scheduler.now
        if not self.hub.use_token(token, now):
            self._read_rejected += 1
            return
        queue = self._read_queue
        while queue and queue[0] <= now:
            queue.popleft()
        if len(queue) >= self.preset.reads.queue_limit:
            self._read_rejected += 1
            return
        start = max(now, heapq.heappop(self._servers))
        done = start + self.rng.uniform(*self.preset.reads.service_ms)
        heapq.heappush(self._servers, done)
        queue.append(start)
        self._reads.append((arrival, done + self._hop()))

    def _on_anchor(self) -> None:
        now = self.scheduler.now
        self._n_anchor += 1
        digest = sha256(b"anchor" + self._n_anchor.to_bytes(8, "big"))
        size = self.rng.randint(*self.workload.tx_size)
        record = LedgerRecord(RecordKind.DATA_ANCHOR, digest, now, size_bytes=size)
        try:
            self.ledger.submit(record)
        except QueueFull:
            self.ledger.rejected.append(record)
        nxt = now + 1000.0 / self.preset.load.background_tps
        if nxt < self.t_end:
            self.scheduler.schedule_at(nxt, self._on_anchor)

    def _align(self) -> None:
        for _ in range(-len(self.ledger.mempool) % self.config.block_size):
            self._n_anchor += 1
            digest = sha256(b"anchor" + self._n_anchor.to_bytes(8, "big"))
            self.ledger.submit(LedgerRecord(RecordKind.DATA_ANCHOR, digest, self.scheduler.now,
                                            size_bytes=self.workload.tx_size[0]))

    def run(self) -> MetricsRecord:
        wl = self.workload
        self._setup()
        arrivals = self._arrivals() if wl.duration_s > 0 else []
        self.n_issued = len(arrivals)
        for i, t in enumerate(arrivals):
            self.scheduler.schedule_at(t, self._on_arrival, i, t)
        if self.preset.load.background_tps > 0 and wl.duration_s > 0:
            self.scheduler.schedule_at(self.t_start, self._on_anchor)
            if self.preset.load.align_blocks:
                self.scheduler.schedule_at(self.t_end + ALIGN_DELAY_MS, self._align)
        self.ledger.flush()
        return self._metrics()

    def _metrics(self) -> MetricsRecord:
        wl = self.workload
        floor_s = max(wl.duration_s, 1e-9)
        committed, last_commit = 0, self.t_start
        for block in self.ledger.chain:
            k = sum(1 for r in block.records if r.timestamp >= self.t_start)
            if k:
                committed += k
                last_commit = max(last_commit, block.commit_time)
        window_s = (last_commit - self.t_start) / 1000.0
        throughput = committed / window_s if window_s > 0 else 0.0

        tx_lat, done_at = [], self.t_start
        for audit, t, back in self._tx:
            if audit.committed_at is not None:
                tx_lat.append(audit.committed_at + back - t)
                done_at = max(done_at, audit.committed_at)
        req_window = max((done_at - self.t_start) / 1000.0, floor_s)
        read_lat = [done - t for t, done in self._reads]
        last_read = max((done for _, done in self._reads), default=self.t_start)
        read_window = (last_read - self.t_start) / 1000.0
        samples = tuple(tx_lat + read_lat)
        rejected = len(self.ledger.rejected) + self._read_rejected
        return MetricsRecord(
            send_rate=wl.send_rate,
            n=self.n_issued,
            mean_latency_ms=math.fsum(samples) / len(samples) if samples else None,
            throughput_tps=throughput,
            read_latency_ms=math.fsum(read_lat) / len(read_lat) if read_lat else None,
            read_throughput_tps=len(read_lat) / read_window if read_window > 0 else 0.0,
            engine=self.config.engine.value,
            seed=wl.seed,
            block_size=self.config.block_size,
            request_throughput_tps=len(tx_lat) / req_window if self._tx else 0.0,
            samples=samples,
            read_samples=tuple(read_lat),
            rejected=rejected,
            granted=sum(1 for a, _, _ in self._tx if a.decision is Decision.GRANTED),
            chain_ok=self.ledger.verify_chain(),
            chain_text=chain_export_text(self.ledger.chain),
        )


def run_step(preset: Preset, workload: Workload, step_seed: int) -> MetricsRecord:
    return Simulation(preset, workload, step_seed).run()


def _run_step_args(args):
    return run_step(*args)


def ladder(preset: Preset, seed: int, grid=None) -> list[Workload]:
    """Workloads for every grid point of the preset's sweep."""
    sw = preset.sweep
    grid = sw.grid if grid is None else grid
    base = dict(duration_s=preset.duration_s, tx_size=preset.tx_size, mix=preset.mix,
                seed=seed, arrival=preset.arrival)
    if sw.parameter == "block_size":
        return [Workload(sw.send_rate, block_size=int(b), **base) for b in grid]
    return [Workload(float(r), **base) for r in grid]


def step_seed(seed: int, index: int, w: Workload) -> int:
    return derive_seed(seed, "step", index, w.send_rate, w.block_size)


def run_sweep(preset: Preset, workloads, seed: int | None = None, workers: int = 1) -> list[MetricsRecord]:
    """Run one simulation per workload; results depend only on (preset, workloads, seed)."""
    workloads = list(workloads)
    if not workloads:
        raise ConfigInvalid("workload ladder is empty")
    if not isinstance(preset, Preset):
        raise ConfigInvalid("run_sweep needs a Preset")
    seed = workloads[0].seed if seed is None else seed
    jobs = [(preset, w, step_seed(seed, i, w)) for i, w in enumerate(workloads)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_step_args, jobs))
    return [_run_step_args(j) for j in jobs]


# -- comparison -------------------------------------------------------------


def _points(metrics, metric: str, x: str) -> list[tuple[float, float]]:
    pts = []
    for m in metrics:
        if isinstance(m, MetricsRecord):
            y = m.value(metric)
            if y is not None:
                pts.append((float(m.value(x)), float(y)))
        else:
            pts.append((float(m[0]), float(m[1])))
    pts.sort()
    return pts


def compare_to_reference(metrics, curve: ReferenceCurve, metric: str = "mean_latency_ms",
                         x: str = "send_rate") -> ComparisonReport:
    """Fractional deviation of measured values from ``curve`` at each reference x.

    ``metrics`` is a list of :class:`MetricsRecord` (read through ``metric`` and
    ``x``) or of ``(x, y)`` pairs.  Off-grid measurements are interpolated
    linearly; reference points outside the measured range are skipped.
    """
    pts = _points(metrics, metric, x)
    report = ComparisonReport(curve.source, curve.tolerance)
    if not pts:
        raise GridMismatch("no measured points")
    mx = [p[0] for p in pts]
    my = [p[1] for p in pts]
    lo, hi = mx[0], mx[-1]
    for rx, ry in curve.points:
        if rx < lo or rx > hi:
            continue
        y = float(np.interp(rx, mx, my))
        dev = (y - ry) / ry
        report.checks.append(PointCheck(rx, y, ry, dev, abs(dev) <= curve.tolerance + 1e-12))
    if not report.checks:
        raise GridMismatch(f"measured range [{lo:g}, {hi:g}] misses reference grid {curve.xs}")
    return report


def relative_growth(metrics, metric: str = "mean_latency_ms") -> float:
    """(last - first) / first over records ordered by send rate."""
    pts = _points(metrics, metric, "send_rate")
    if len(pts) < 2 or pts[0][1] == 0:
        raise ValueError("need at least two points with a nonzero first value")
    return (pts[-1][1] - pts[0][1]) / pts[0][1]


# -- export -----------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _write(path, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def export_csv(records, path) -> None:
    """Header plus one row per record, in the order given."""
    records = list(records)
    if not records:
        raise IoFailure("no records to export")
    _write(path, csv_text(records))


def export_samples(records, path) -> None:
    """Per-request latency samples, one row each, for recomputing the means."""
    records = list(records)
    if not records:
        raise IoFailure("no records to export")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_COLUMNS)
    for r in records:
        for i, s in enumerate(r.samples):
            w.writerow([_cell(r.send_rate), r.block_size, i, repr(s)])
    _write(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
