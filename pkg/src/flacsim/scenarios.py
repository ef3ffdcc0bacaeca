"""Named scenarios: what each one runs, what it is compared against, what it writes.

The command-line interface is a thin wrapper around :func:`run_scenario`; every
file it writes is produced from the returned :class:`ScenarioResult`.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from . import fuzzy
from .bench import (
    ComparisonReport,
    MetricsRecord,
    compare_to_reference,
    csv_text,
    curve_for,
    ladder,
    run_sweep,
)
from .errors import ConfigInvalid, UnknownScenario
from .ledger import Engine
from .presets import Preset, load_preset


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str  # sweep | fuzzy | chain
    summary: str


SCENARIOS = {
    s.name: s
    for s in (
        Scenario("latency-sweep", "sweep", "mean commit latency per consensus engine over send rates"),
        Scenario("throughput-sweep", "sweep", "ledger throughput per consensus engine over send rates"),
        Scenario("blocksize-sweep", "sweep", "ledger throughput over transactions per block under saturation"),
        Scenario("read-sweep", "sweep", "token-checked read throughput and latency over send rates"),
        Scenario("txlatency-sweep", "sweep", "end-to-end transaction latency over high send rates"),
        Scenario("fuzzy-audit", "fuzzy", "fuzzy tier versus the crisp rule table on every corner input"),
        Scenario("chain-verify", "chain", "one seeded run whose chain is exported and verified"),
    )
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    preset: str = "paper"
    engine: str | None = None
    out: str | None = None
    overrides: tuple = ()
    config_file: str | None = None
    preset_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        get_scenario(self.scenario)
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigInvalid("seed must be an integer")
        if self.engine is not None:
            self.engine = Engine.parse(self.engine).value
        self.overrides = tuple(self.overrides)

    def load(self) -> Preset:
        return load_preset(self.preset, self.scenario, self.engine, self.overrides,
                           preset_dir=self.preset_dir, config_file=self.config_file)


@dataclass
class ScenarioResult:
    scenario: str
    preset: Preset
    records: list = field(default_factory=list)
    report: ComparisonReport | None = None
    table_text: str = ""
    chain_text: str = ""
    ok: bool = True

    def chain_export(self) -> str:
        return self.chain_text


def chain_bundle(records: list[MetricsRecord]) -> str:
    parts = []
    for i, r in enumerate(records):
        parts.append(f"# step {i} send_rate={r.send_rate!r} block_size={r.block_size} seed={r.seed}\n")
        parts.append(r.chain_text)
    return "".join(parts)


def fuzzy_audit_text(rb: fuzzy.RuleBase = fuzzy.DEFAULT_RULE_BASE) -> tuple[str, int, int]:
    """CSV of every corner input with fuzzy and crisp tiers; returns (text, agree, total)."""
    names = rb.referenced_variables
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "doa", "fuzzy_tier", "crisp_tier", "agree"])
    agree = total = 0
    for inp in fuzzy.corner_inputs(rb):
        d = fuzzy.infer_doa(inp, rb)
        crisp = fuzzy.crisp_rule_table(inp, rb)
        values = inp.as_dict()
        ok = d.tier == crisp
        agree += ok
        total += 1
        w.writerow([*(repr(values[n]) for n in names), repr(d.doa), d.tier.label, crisp.label, int(ok)])
    return buf.getvalue(), agree, total


def run_scenario(cfg: ScenarioConfig, check_reference: bool = False) -> ScenarioResult:
    """Run ``cfg`` and return everything the CLI would write."""
    sc = get_scenario(cfg.scenario)
    preset = cfg.load()
    result = ScenarioResult(sc.name, preset)
    if sc.kind == "fuzzy":
        text, agree, total = fuzzy_audit_text()
        result.table_text = text
        result.ok = agree == total
        return result
    steps = ladder(preset, cfg.seed)
    if sc.kind == "chain":
        steps = steps[:1]
    records = run_sweep(preset, steps, cfg.seed, workers=cfg.workers)
    result.records = records
    result.table_text = csv_text(records)
    result.chain_text = chain_bundle(records)
    if sc.kind == "chain":
        result.ok = all(r.chain_ok for r in records)
        return result
    if check_reference:
        x = "block_size" if preset.sweep.parameter == "block_size" else "send_rate"
        result.report = compare_to_reference(records, curve_for(preset), preset.reference.metric, x)
        result.ok = result.report.passed
    return result


def describe(name: str, preset: str = "paper", preset_dir=None) -> str:
    """Human-readable summary of a scenario's target table and parameters."""
    sc = get_scenario(name)
    lines = [f"{sc.name}: {sc.summary}"]
    if sc.kind == "fuzzy":
        rb = fuzzy.DEFAULT_RULE_BASE
        lines.append(f"inputs enumerated on term apexes: {', '.join(rb.referenced_variables)}")
        lines.append("output: CSV of doa, fuzzy tier and crisp tier per corner")
        return "\n".join(lines)
    p = load_preset(preset, name, preset_dir=preset_dir)
    grid = ", ".join(f"{g:g}" for g in p.sweep.grid)
    if sc.kind == "chain":
        lines.append(f"runs the first {p.sweep.parameter} grid point ({p.sweep.grid[0]:g}) once")
    else:
        lines.append(f"target table: {p.reference.table}")
        lines.append(f"metric: {p.reference.metric} (tolerance {p.reference.tolerance:.0%})")
        lines.append(f"{p.sweep.parameter} grid: {{{grid}}}")
        if p.sweep.parameter == "block_size":
            lines.append(f"send rate: {p.sweep.send_rate:g} req/s plus {p.load.background_tps:g} tx/s background")
    c = p.consensus
    lines.append(f"preset {p.name}: engine {c.engine.value}, {c.node_count} nodes, block size {c.block_size}, "
                 f"batch timeout {c.batch_timeout_ms:g} ms, block interval {c.block_interval_ms:g} ms")
    lines.append(f"  hop {c.per_hop_ms[0]:g}-{c.per_hop_ms[1]:g} ms, verify {p.verify_ms[0]:g}-{p.verify_ms[1]:g} ms, "
                 f"contract {c.contract_exec_ms[0]:g}-{c.contract_exec_ms[1]:g} ms")
    lines.append(f"  orderer {c.orderer_block_ms:g} + {c.orderer_tx_ms:g}/tx ms, raft {c.raft_block_ms:g} + "
                 f"{c.raft_tx_ms:g}/tx ms, validate {c.validate_block_ms:g} + {c.validate_tx_ms:g}/tx ms")
    lines.append(f"  workload {p.duration_s:g} s, mix {p.mix:g}, {p.users} users, {p.services} services, "
                 f"{p.load.tx_per_request:g} tx/request + {p.load.conflict_rate:g}*rate, "
                 f"background {p.load.background_tps:g} tx/s")
    if p.mix > 0:
        lines.append(f"  reads: {p.reads.workers} workers, service {p.reads.service_ms[0]:g}-"
                     f"{p.reads.service_ms[1]:g} ms, queue {p.reads.queue_limit}")
    return "\n".join(lines)
