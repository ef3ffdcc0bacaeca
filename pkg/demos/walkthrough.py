"""One patient record, end to end.

A cardiology service and a nurse register, the nurse asks for the record
three times under different patient conditions, one granted token is
revoked, and the resulting chain is verified and printed.

    python3 demos/walkthrough.py
"""
import random

from flacsim.hub import AccessRequest, Hub
from flacsim.identity import AttributeVector, Credentials
from flacsim.ledger import ConsensusConfig, Ledger, Scheduler, chain_export_text
from flacsim.proofsys import ProofSystem

SEED = 7

sched = Scheduler()
ledger = Ledger(ConsensusConfig(engine="Raft", block_size=4, batch_timeout_ms=100), sched, random.Random(SEED))
hub = Hub(ledger, ProofSystem(random.Random(SEED + 1)), random.Random(SEED + 2))

service = Credentials("cardio-svc", "service", AttributeVector(
    {"department": "cardiology"}, {"resource": "ehr"}, data_sensitivity=0.0, treatment_urgency=0.8))
nurse = Credentials("nurse-17", "user", AttributeVector(
    {"role": "nurse", "ward": "cardiology"}, {"record": "ehr"}, trust_level=1.0, compliance_history=0.9))

outcome, zs, zu = hub.register_pair(service, nurse)
print(f"registration: {outcome.value}")
print(f"  service zk-id {zs.hex()[:16]}..  user zk-id {zu.hex()[:16]}..")

# patient condition drives the policy: stable patients unlock full access
for i, condition in enumerate((0.0, 0.5, 1.0)):
    sched.advance(50)
    req = AccessRequest(f"req-{i}", zu.value, zs.value, "ehr/4411", frozenset({"read", "write"}),
                        submitted_at=sched.now, patient_condition=condition)
    audit = hub.process_request(req)
    rules = ", ".join(f"{rid}={s:.2f}" for rid, s in audit.fired_rules)
    print(f"{req.request_id}: condition {condition:.1f} -> DoA {audit.doa:.3f} {audit.tier:<9} "
          f"{audit.decision.value:<7} fired [{rules}]")

granted = [a for a in hub.audit.values() if a.token_id]
tok = hub.tokens[granted[0].token_id]
print(f"token for {tok.request_id}: permissions {sorted(tok.permissions)}, usable {hub.use_token(tok)}")
hub.revoke(tok.token_id)
print(f"after revocation usable {hub.use_token(tok)}")

ledger.flush()
print(f"\nchain verifies: {ledger.verify_chain()}  height {ledger.height}")
print(chain_export_text(ledger.chain), end="")
for a in hub.audit.values():
    print(f"{a.request_id}: {a.logging_status.value} at {a.committed_at:.1f} ms ({a.reason})")
