"""Preset files: INI sections describing one reproducible scenario setup.

Schema (every key optional unless noted; see ``docs/config.md``)::

    [preset]      name, description, extends (a preset this one layers over)
    [consensus]   any ConsensusConfig field; intervals as "lo, hi"
    [proofs]      verify_ms
    [hub]         token_ttl_ms, forward_to_ledger
    [workload]    duration_s, tx_size, mix, arrival, users, services, warmup_ms
    [load]        tx_per_request, conflict_rate, background_tps, align_blocks
    [reads]       workers, service_ms, queue_limit
    [sweep]       parameter (send_rate | block_size), grid, send_rate
    [reference]   table, column, metric, tolerance

A section name may carry qualifiers, ``[load:Solo]`` or
``[sweep:blocksize-sweep]`` or ``[reference:latency-sweep:Raft]``; qualified
sections apply on top of the plain one when the scenario and engine match,
more specific ones last.  Overrides use ``section.key=value`` and win over
everything in the file.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .errors import ConfigInvalid
from .ledger import ConsensusConfig, Engine

PRESET_DIR_ENV = "FLACSIM_PRESET_DIR"

_INTERVAL_KEYS = {"per_hop_ms", "contract_exec_ms", "verify_ms", "tx_size", "service_ms"}


@dataclass
class LoadModel:
    """Ledger transactions generated per access request, plus a background stream.

    Each request commits its decision record and on average
    ``tx_per_request - 1 + conflict_rate * send_rate`` further records;
    ``background_tps`` records per second arrive independently of requests.
    With ``align_blocks`` the background stream tops the run up to a whole
    number of blocks once sending stops, so no partial block ends the run.
    """

    tx_per_request: float = 1.0
    conflict_rate: float = 0.0
    background_tps: float = 0.0
    align_blocks: bool = False

    def extra_per_request(self, send_rate: float) -> float:
        return max(0.0, self.tx_per_request - 1.0 + self.conflict_rate * send_rate)


@dataclass
class ReadService:
    workers: int = 100
    service_ms: tuple = (50.0, 50.0)
    queue_limit: int = 200


@dataclass
class Sweep:
    parameter: str = "send_rate"
    grid: tuple = (50, 100, 150, 200, 250, 300)
    send_rate: float = 100.0


@dataclass
class ReferenceSpec:
    table: str = ""
    column: str = ""
    metric: str = "mean_latency_ms"
    tolerance: float = 0.15


@dataclass
class Preset:
    name: str
    consensus: ConsensusConfig
    description: str = ""
    verify_ms: tuple = (10.0, 50.0)
    token_ttl_ms: float = 300_000.0
    forward_to_ledger: bool = False
    duration_s: float = 10.0
    tx_size: tuple = (1024, 5120)
    mix: float = 0.0
    arrival: str = "fixed"
    users: int = 40
    services: int = 8
    warmup_ms: float = 2000.0
    load: LoadModel = field(default_factory=LoadModel)
    reads: ReadService = field(default_factory=ReadService)
    sweep: Sweep = field(default_factory=Sweep)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)

    def __post_init__(self):
        lo, hi = self.tx_size
        if not 1024 <= lo <= hi <= 5120:
            raise ConfigInvalid(f"tx_size {self.tx_size} outside [1024, 5120]")
        if not 0.0 <= self.mix <= 1.0:
            raise ConfigInvalid("mix must lie in [0, 1]")
        if self.arrival not in ("fixed", "poisson"):
            raise ConfigInvalid(f"arrival must be fixed or poisson, got {self.arrival!r}")
        if self.duration_s < 0:
            raise ConfigInvalid("duration_s must be non-negative")
        if self.users < 1 or self.services < 1:
            raise ConfigInvalid("population needs at least one user and one service")
        if self.sweep.parameter not in ("send_rate", "block_size"):
            raise ConfigInvalid(f"unknown sweep parameter {self.sweep.parameter!r}")


def _parse_value(key: str, text: str, current):
    text = text.strip()
    try:
        if key in _INTERVAL_KEYS or key == "grid":
            parts = tuple(float(p) for p in text.split(","))
            if key in ("tx_size", "grid") and all(p == int(p) for p in parts):
                parts = tuple(int(p) for p in parts)
            if key in _INTERVAL_KEYS and len(parts) != 2:
                raise ValueError
            return parts
        if isinstance(current, bool):
            if text.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError
            return text.lower() in ("true", "yes", "1")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
    except ValueError:
        raise ConfigInvalid(f"bad value for {key}: {text!r}") from None
    return text


def _apply(target: dict, defaults, section: configparser.SectionProxy | dict, name: str):
    known = {f.name: getattr(defaults, f.name) for f in fields(defaults)}
    for key, text in section.items():
        if key not in known:
            raise ConfigInvalid(f"unknown key {name}.{key}")
        target[key] = _parse_value(key, text, known[key])


_PRESET_SECTIONS = {
    "proofs": {"verify_ms"},
    "hub": {"token_ttl_ms", "forward_to_ledger"},
    "workload": {"duration_s", "tx_size", "mix", "arrival", "users", "services", "warmup_ms"},
}


def _flatten(cp: configparser.ConfigParser, scenario: str | None, engine: str | None) -> configparser.ConfigParser:
    """Merge qualified sections for ``scenario``/``engine`` into plain ones."""
    flat = configparser.ConfigParser()
    flat.optionxform = str
    bases = []
    for name in cp.sections():
        base = name.split(":")[0]
        if base not in bases:
            bases.append(base)
    for base in bases:
        order = [base]
        if engine:
            order.append(f"{base}:{engine}")
        if scenario:
            order.append(f"{base}:{scenario}")
            if engine:
                order.append(f"{base}:{scenario}:{engine}")
        flat.add_section(base)
        for name in order:
            if cp.has_section(name):
                for key, value in cp.items(name, raw=True):
                    flat.set(base, key, value)
    return flat


def _engine_of(cp: configparser.ConfigParser, scenario: str | None) -> str:
    engine = "Solo"
    for name in ("consensus", f"consensus:{scenario}" if scenario else None):
        if name and cp.has_section(name) and cp.has_option(name, "engine"):
            engine = cp.get(name, "engine")
    return Engine.parse(engine).value


def resolve(cp: configparser.ConfigParser, scenario: str | None = None, engine=None,
            overrides=()) -> Preset:
    """Build a :class:`Preset` from parsed INI text for one scenario and engine."""
    engine = Engine.parse(engine).value if engine else _engine_of(cp, scenario)
    flat = _flatten(cp, scenario, engine)
    if not flat.has_section("consensus"):
        flat.add_section("consensus")
    flat.set("consensus", "engine", engine)
    return preset_from_parser(flat, overrides)


def preset_from_parser(cp: configparser.ConfigParser, overrides=()) -> Preset:
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigInvalid(f"override {item!r} must look like section.key=value")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())
    known_sections = {"preset", "consensus", "load", "reads", "sweep", "reference", *_PRESET_SECTIONS}
    unknown = set(cp.sections()) - known_sections
    if unknown:
        raise ConfigInvalid(f"unknown sections {sorted(unknown)}")

    def section(name):
        return cp[name] if cp.has_section(name) else {}

    cons: dict = {}
    _apply(cons, ConsensusConfig(), section("consensus"), "consensus")
    load: dict = {}
    _apply(load, LoadModel(), section("load"), "load")
    reads: dict = {}
    _apply(reads, ReadService(), section("reads"), "reads")
    sweep: dict = {}
    _apply(sweep, Sweep(), section("sweep"), "sweep")
    ref: dict = {}
    _apply(ref, ReferenceSpec(), section("reference"), "reference")
    top: dict = {}
    stub = Preset("stub", ConsensusConfig())
    for sec, keys in _PRESET_SECTIONS.items():
        body = section(sec)
        for key in body:
            if key not in keys:
                raise ConfigInvalid(f"unknown key {sec}.{key}")
            top[key] = _parse_value(key, body[key], getattr(stub, key))
    meta = section("preset")
    try:
        return Preset(
            name=meta.get("name", "custom"),
            description=meta.get("description", ""),
            consensus=ConsensusConfig(**cons),
            load=LoadModel(**load),
            reads=ReadService(**reads),
            sweep=Sweep(**sweep),
            reference=ReferenceSpec(**ref),
            **top,
        )
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from None


def preset_dirs(extra=None) -> list[Path]:
    dirs = []
    if extra:
        dirs.append(Path(extra))
    env = os.environ.get(PRESET_DIR_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(Path(str(resources.files("flacsim") / "presets")))
    return dirs


def find_preset(name: str, preset_dir=None) -> Path:
    p = Path(name)
    if p.suffix == ".ini" and p.is_file():
        return p
    for d in preset_dirs(preset_dir):
        candidate = d / f"{name}.ini"
        if candidate.is_file():
            return candidate
    raise ConfigInvalid(f"no preset named {name!r}")


def _read_preset(path: Path, preset_dir=None, seen=()) -> configparser.ConfigParser:
    """Parse ``path``, layering it over the preset named by ``[preset] extends``."""
    if path in seen:
        raise ConfigInvalid(f"preset {path} extends itself")
    own = configparser.ConfigParser()
    own.optionxform = str
    try:
        own.read(path)
    except configparser.Error as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    parent = own.get("preset", "extends", fallback=None)
    if parent is None:
        return own
    cp = _read_preset(find_preset(parent, preset_dir), preset_dir, (*seen, path))
    cp.read(path)
    cp.remove_option("preset", "extends")
    return cp


def load_preset(name: str, scenario: str | None = None, engine=None, overrides=(),
                preset_dir=None, config_file=None) -> Preset:
    """Load a preset by name or path.

    ``config_file`` is read on top of the preset, then ``engine`` and
    ``overrides`` apply.
    """
    cp = _read_preset(find_preset(name, preset_dir), preset_dir)
    if config_file is not None:
        try:
            found = cp.read(config_file)
        except configparser.Error as exc:
            raise ConfigInvalid(f"{config_file}: {exc}") from None
        if not found:
            raise ConfigInvalid(f"cannot read config file {config_file}")
    return resolve(cp, scenario, engine, overrides)


def available_presets(preset_dir=None) -> list[str]:
    names = set()
    for d in preset_dirs(preset_dir):
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.ini"))
    return sorted(names)
