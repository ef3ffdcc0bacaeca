"""Run every calibrated sweep and set it beside its reference table.

Takes roughly a minute on one core.

    python3 demos/reproduce_tables.py [--seed 42]
"""
import argparse
from dataclasses import replace

from flacsim.bench import compare_to_reference, curve_for, ladder, relative_growth, run_sweep
from flacsim.presets import load_preset

RUNS = [
    ("latency-sweep", "Solo"), ("latency-sweep", "Raft"), ("latency-sweep", "SoloRaft"),
    ("throughput-sweep", "Solo"), ("throughput-sweep", "Raft"), ("throughput-sweep", "SoloRaft"),
    ("blocksize-sweep", None), ("read-sweep", None), ("txlatency-sweep", None),
]

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=42)
args = ap.parse_args()

cache = {}
for scenario, engine in RUNS:
    preset = load_preset("paper", scenario, engine)
    # the two send-rate sweeps share one deployment, so simulate it once
    key = repr(replace(preset, reference=None))
    if key not in cache:
        cache[key] = run_sweep(preset, ladder(preset, args.seed))
    records = cache[key]
    x = "block_size" if preset.sweep.parameter == "block_size" else "send_rate"
    report = compare_to_reference(records, curve_for(preset), preset.reference.metric, x)
    print(f"== {scenario} {engine or ''}".rstrip())
    print(report.to_text())
    if scenario == "txlatency-sweep":
        print(f"growth over the grid: {relative_growth(records):.1%}")
    print()
