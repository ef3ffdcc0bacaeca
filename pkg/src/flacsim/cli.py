"""Command-line entry point.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error, 3 configuration
error, 4 reference check failed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigInvalid, FlacsimError, IoFailure, NoQuorum, UnknownScenario
from .presets import PRESET_DIR_ENV, available_presets
from .scenarios import SCENARIOS, ScenarioConfig, describe, run_scenario

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_REFERENCE = 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flacsim", description="Access-control ledger simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("--scenario", required=True, help=f"one of: {', '.join(SCENARIOS)}")
    run.add_argument("--engine", help="Solo, Raft or SoloRaft (default: the preset's)")
    run.add_argument("--preset", default="paper", help=f"preset name or .ini path (searched in ${PRESET_DIR_ENV})")
    run.add_argument("--preset-dir", help="extra directory to search for presets")
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--out", required=True, help="CSV path; sibling files share its stem")
    run.add_argument("--config", help="INI file layered over the preset")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override one preset value; repeatable")
    run.add_argument("--check-reference", action="store_true",
                     help="compare with the reference table and exit 4 on a tolerance breach")
    run.add_argument("--workers", type=int, default=1, help="parallel sweep steps")

    desc = sub.add_parser("describe", help="show a scenario's target table and preset parameters")
    desc.add_argument("scenario")
    desc.add_argument("--preset", default="paper")
    desc.add_argument("--preset-dir")

    lst = sub.add_parser("presets", help="list available presets")
    lst.add_argument("--preset-dir")
    return ap


def output_paths(out) -> dict:
    """Every file ``run`` may write, keyed by role."""
    out = Path(out)
    stem = out.with_suffix("")
    return {
        "csv": out,
        "samples": Path(f"{stem}.samples.csv"),
        "chain": Path(f"{stem}.chain.txt"),
        "report": Path(f"{stem}.report.txt"),
    }


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _run(args) -> int:
    cfg = ScenarioConfig(
        scenario=args.scenario, seed=args.seed, preset=args.preset, engine=args.engine,
        out=args.out, overrides=args.overrides, config_file=args.config,
        preset_dir=args.preset_dir, workers=args.workers,
    )
    result = run_scenario(cfg, check_reference=args.check_reference)
    paths = output_paths(args.out)
    _write(paths["csv"], result.table_text)
    if result.records:
        from .bench import export_samples

        export_samples(result.records, paths["samples"])
        _write(paths["chain"], result.chain_text)
    if result.report is not None:
        _write(paths["report"], result.report.to_text() + "\n")
        print(result.report.to_text())
    print(f"wrote {paths['csv']}")
    if not result.ok:
        if result.scenario == "chain-verify":
            print("chain verification failed", file=sys.stderr)
        elif result.scenario == "fuzzy-audit":
            print("fuzzy tiers disagree with the crisp rule table", file=sys.stderr)
        else:
            print("reference check failed", file=sys.stderr)
        return EXIT_REFERENCE
    return EXIT_OK


def _msg(exc: Exception) -> str:
    # KeyError subclasses would otherwise print their message quoted
    return str(exc.args[0]) if exc.args else type(exc).__name__


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "describe":
            print(describe(args.scenario, args.preset, args.preset_dir))
            return EXIT_OK
        if args.command == "presets":
            print("\n".join(available_presets(args.preset_dir)))
            return EXIT_OK
        return _run(args)
    except UnknownScenario as exc:
        print(f"flacsim: {_msg(exc)}", file=sys.stderr)
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ConfigInvalid, NoQuorum) as exc:
        print(f"flacsim: configuration error: {_msg(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except FlacsimError as exc:
        print(f"flacsim: {_msg(exc)}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
