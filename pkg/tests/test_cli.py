"""Command-line behaviour, exit codes and equivalence with library calls."""
import subprocess
import sys

import pytest

from flacsim import cli
from flacsim.scenarios import ScenarioConfig, run_scenario

SHORT = ["--set", "workload.duration_s=1", "--set", "workload.warmup_ms=500",
         "--set", "workload.users=8", "--set", "workload.services=2"]


def run(*argv):
    return cli.main(list(argv))


def test_run_writes_outputs_and_matches_library(tmp_path):
    out = tmp_path / "out.csv"
    code = run("run", "--scenario", "latency-sweep", "--engine", "solo", "--preset", "paper",
               "--seed", "42", "--out", str(out), *SHORT)
    assert code == cli.EXIT_OK
    paths = cli.output_paths(out)
    assert paths["samples"].exists() and paths["chain"].exists()
    cfg = ScenarioConfig("latency-sweep", 42, engine="solo", overrides=SHORT[1::2])
    result = run_scenario(cfg)
    assert out.read_text() == result.table_text
    assert paths["chain"].read_text() == result.chain_export()


def test_missing_seed_is_usage_error(tmp_path, capsys):
    code = run("run", "--scenario", "latency-sweep", "--out", str(tmp_path / "x.csv"))
    assert code == cli.EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_unknown_scenario(tmp_path, capsys):
    code = run("run", "--scenario", "warp", "--seed", "1", "--out", str(tmp_path / "x.csv"))
    assert code == cli.EXIT_USAGE
    assert "unknown scenario" in capsys.readouterr().err


def test_config_error(tmp_path):
    code = run("run", "--scenario", "latency-sweep", "--engine", "raft", "--seed", "1",
               "--out", str(tmp_path / "x.csv"), "--set", "consensus.node_count=3")
    assert code == cli.EXIT_CONFIG


def test_sabotaged_preset_fails_reference(tmp_path):
    code = run("run", "--scenario", "latency-sweep", "--seed", "1", "--out", str(tmp_path / "x.csv"),
               "--check-reference", "--set", "consensus.validate_block_ms=400", *SHORT)
    assert code == cli.EXIT_REFERENCE
    assert cli.output_paths(tmp_path / "x.csv")["report"].exists()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = run("run", "--scenario", "fuzzy-audit", "--seed", "1", "--out", str(blocker / "x.csv"))
    assert code == cli.EXIT_FAILURE


def test_fuzzy_audit_and_chain_verify(tmp_path):
    assert run("run", "--scenario", "fuzzy-audit", "--seed", "1", "--out", str(tmp_path / "f.csv")) == 0
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines) == 163 and all(line.endswith(",1") for line in lines[1:])
    assert run("run", "--scenario", "chain-verify", "--seed", "1", "--out", str(tmp_path / "c.csv"), *SHORT) == 0


def test_describe_and_presets(capsys):
    assert run("describe", "blocksize-sweep") == 0
    assert "300, 500, 600, 700, 800, 900" in capsys.readouterr().out
    assert run("presets") == 0
    assert "paper" in capsys.readouterr().out.split()
    assert run("describe", "nope") == cli.EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flacsim", "describe", "latency-sweep"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "grid" in proc.stdout
