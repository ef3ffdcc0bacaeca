"""Preset files, qualified sections, overrides and scenario descriptions."""
import pytest

from flacsim.errors import ConfigInvalid, UnknownScenario
from flacsim.ledger import Engine
from flacsim.presets import PRESET_DIR_ENV, available_presets, load_preset
from flacsim.scenarios import SCENARIOS, describe


def test_shipped_presets():
    assert {"paper", "paper-solo", "paper-raft", "paper-soloraft"} <= set(available_presets())


def test_engine_sections_layer():
    solo = load_preset("paper", "latency-sweep", "Solo")
    raft = load_preset("paper", "latency-sweep", "Raft")
    assert solo.consensus.engine is Engine.SOLO and raft.consensus.engine is Engine.RAFT
    assert solo.load.background_tps != raft.load.background_tps
    assert solo.sweep.grid == (50, 100, 150, 200, 250, 300)


def test_named_engine_presets():
    assert load_preset("paper-soloraft", "latency-sweep").consensus.engine is Engine.SOLO_RAFT
    assert load_preset("paper-raft").name == "paper-raft"


def test_scenario_sections():
    p = load_preset("paper", "blocksize-sweep")
    assert p.sweep.parameter == "block_size"
    assert p.sweep.grid == (300, 500, 600, 700, 800, 900)
    t = load_preset("paper", "throughput-sweep")
    assert t.reference.metric == "throughput_tps"


def test_overrides_win():
    p = load_preset("paper", "latency-sweep", "Raft", ["consensus.node_count=20", "workload.mix=0.5"])
    assert p.consensus.node_count == 20 and p.mix == 0.5


@pytest.mark.parametrize("item", ["consensus.node_count=3", "nonsense", "bogus.key=1",
                                  "consensus.bogus=1", "workload.mix=abc", "consensus.per_hop_ms=1"])
def test_bad_overrides(item):
    with pytest.raises(ConfigInvalid):
        load_preset("paper", "latency-sweep", "Raft", [item])


def test_config_file_layer(tmp_path):
    cfg = tmp_path / "extra.ini"
    cfg.write_text("[consensus]\nblock_size = 17\n")
    assert load_preset("paper", config_file=cfg).consensus.block_size == 17
    bad = tmp_path / "bad.ini"
    bad.write_text("no section header\n")
    with pytest.raises(ConfigInvalid):
        load_preset("paper", config_file=bad)
    with pytest.raises(ConfigInvalid):
        load_preset("paper", config_file=tmp_path / "absent.ini")


def test_preset_dir_env(tmp_path, monkeypatch):
    (tmp_path / "mine.ini").write_text("[preset]\nname = mine\nextends = paper\n[consensus]\nnode_count = 40\n")
    monkeypatch.setenv(PRESET_DIR_ENV, str(tmp_path))
    p = load_preset("mine", "latency-sweep")
    assert p.name == "mine" and p.consensus.node_count == 40
    with pytest.raises(ConfigInvalid):
        load_preset("nowhere")


def test_self_extension_rejected(tmp_path):
    (tmp_path / "loop.ini").write_text("[preset]\nextends = loop\n")
    with pytest.raises(ConfigInvalid):
        load_preset("loop", preset_dir=tmp_path)


def test_describe_mentions_grids():
    assert "{50, 100, 150, 200, 250, 300}" in describe("latency-sweep")
    assert "Send Rate vs. Latency" in describe("latency-sweep")
    assert "{300, 500, 600, 700, 800, 900}" in describe("blocksize-sweep")
    for name in SCENARIOS:
        assert describe(name)
    with pytest.raises(UnknownScenario):
        describe("warp-sweep")
