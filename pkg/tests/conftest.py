import random

import pytest

from flacsim.hub import AccessRequest, Hub
from flacsim.identity import AttributeVector, Credentials
from flacsim.ledger import ConsensusConfig, Ledger, Scheduler
from flacsim.proofsys import ProofSystem


def make_credentials(ident="alice", kind="user", **attrs):
    attrs.setdefault("subject_attrs", {"role": "nurse", "ward": "cardiology"})
    attrs.setdefault("object_attrs", {"record": "ehr-vitals"})
    return Credentials(ident, kind, AttributeVector(**attrs))


def make_hub(seed=0, **config):
    config.setdefault("block_size", 10)
    config.setdefault("batch_timeout_ms", 50.0)
    sched = Scheduler()
    ledger = Ledger(ConsensusConfig(**config), sched, random.Random(seed))
    proofs = ProofSystem(random.Random(seed + 1))
    return Hub(ledger, proofs, random.Random(seed + 2))


def make_request(rid, user, service, now=0.0, action=("read",), **ctx):
    return AccessRequest(rid, user.value, service.value, "ehr/123", frozenset(action), now, **ctx)


@pytest.fixture
def hub():
    return make_hub()


@pytest.fixture
def pair(hub):
    service = make_credentials("svc-1", "service", trust_level=0.9, data_sensitivity=0.0)
    user = make_credentials("alice", "user", trust_level=1.0, compliance_history=1.0)
    outcome, zs, zu = hub.register_pair(service, user)
    return zs, zu


_SWEEPS = {}


def paper_sweep(scenario, engine=None, seed=42):
    """Full-length sweep of the shipped preset, cached for the whole session.

    Returns ``(preset, records, seconds)``.
    """
    import time

    from flacsim.bench import ladder, run_sweep
    from flacsim.presets import load_preset

    key = (scenario, engine, seed)
    if key not in _SWEEPS:
        preset = load_preset("paper", scenario, engine)
        t0 = time.perf_counter()
        records = run_sweep(preset, ladder(preset, seed))
        _SWEEPS[key] = (preset, records, time.perf_counter() - t0)
    return _SWEEPS[key]


ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
