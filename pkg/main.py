#!/usr/bin/env python3
"""
satsec
Intercept probability of hybrid FSO/RF satellite links with an
eavesdropper on each hop.

Usage:
    python main.py run --config scenario.ini --preset fig3_K_sweep --out fig3.csv
    python main.py run --config scenario.ini --seed 7 -v --log-dir ~/.cache/satsec
    python main.py validate --config scenario.ini
    python main.py list-presets

License: GPL-3.0
"""

__version__ = "1.0.0"

import argparse
import sys
from pathlib import Path

# Ensure the project directory is in the path
project_dir = Path(__file__).parent.absolute()
if str(project_dir) not in sys.path:
    sys.path.insert(0, str(project_dir))

# Exit codes
EXIT_OK = 0
EXIT_ROW_ERRORS = 1
EXIT_CONFIG_ERROR = 2


def check_dependencies() -> bool:
    """Check if all required dependencies are available."""
    missing = []

    for module in ("numpy", "scipy", "mpmath"):
        try:
            __import__(module)
        except ImportError:
            missing.append(module)

    if missing:
        print("Missing required dependencies:", file=sys.stderr)
        for dep in missing:
            print(f"  - {dep}", file=sys.stderr)
        print("\nInstall with:", file=sys.stderr)
        print("  pip install -r requirements.txt", file=sys.stderr)
        return False

    return True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satsec",
        description="Intercept probability of hybrid FSO/RF satellite links",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI (.ini/.cfg) or JSON scenario file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="console detail: -v for progress, -vv for debug")
    common.add_argument("--debug", action="store_true", help="same as -vv")
    common.add_argument("--log-dir", type=Path, help="also write a per-run log under <dir>/logs")

    run = sub.add_parser("run", parents=[common], help="run a parameter sweep and write CSV")
    run.add_argument("--preset", help="named sweep (see list-presets)")
    run.add_argument("--out", default="-", help="CSV path, '-' for stdout (default)")
    run.add_argument("--engines", help="comma-separated subset of cf,quad,mc,asym")
    run.add_argument("--mc-samples", type=int, help="Monte Carlo trials per sweep point")
    run.add_argument("--jobs", type=int, help="sweep points evaluated concurrently")
    run.add_argument("--timings", action="store_true", help="fill the runtime_ms column")
    run.add_argument("--dump-config", type=Path, help="write the resolved configuration and continue")

    sub.add_parser("validate", parents=[common], help="check the configured scenario against its oracles")
    sub.add_parser("list-presets", help="list the named sweeps")
    return parser


def cmd_list_presets(args) -> int:
    from sweep_presets import list_presets
    for name, description, overrides in list_presets():
        print(f"{name}\n    {description}\n    overrides: {overrides}")
    return EXIT_OK


def cmd_run(args, log) -> int:
    from dataclasses import replace
    from config_handler import check_engines, load_config, save_config
    from sweep_presets import emit_csv, resolve_engines, run_sweep, sweep_from_config

    scenario_cfg, sweep_cfg = load_config(args.config)
    if args.mc_samples is not None:
        sweep_cfg = replace(sweep_cfg, mc_samples=args.mc_samples)
    if args.seed is not None:
        sweep_cfg = replace(sweep_cfg, seed=args.seed)
    if args.jobs is not None:
        sweep_cfg = replace(sweep_cfg, jobs=args.jobs)

    spec = sweep_from_config(sweep_cfg, args.preset)
    if args.engines:
        engines = resolve_engines(args.engines.split(","))
        spec = spec.with_run_options(engines=engines)
        sweep_cfg = replace(sweep_cfg, engines=list(engines))
    if args.dump_config:
        save_config(scenario_cfg, replace(sweep_cfg, preset=spec.name if args.preset else sweep_cfg.preset),
                    args.dump_config)
    check_engines(scenario_cfg.with_changes(**spec.base_overrides), list(spec.engines))

    rows = run_sweep(spec, scenario_cfg, seed=sweep_cfg.seed, jobs=sweep_cfg.jobs)
    emit_csv(rows, args.out, timings=args.timings)

    failed = [(i, row) for i, row in enumerate(rows) if row.failed]
    for i, row in failed:
        log.error(f"row {i}: {row.variant or spec.name} {row.swept_param}={row.value!r} "
                  f"{row.engine}: {row.error}")
    return EXIT_ROW_ERRORS if failed else EXIT_OK


def cmd_validate(args, log) -> int:
    from config_handler import load_config, series_control
    from validation import run_validation

    scenario_cfg, sweep_cfg = load_config(args.config)
    seed = sweep_cfg.seed if args.seed is None else args.seed
    report = run_validation(scenario_cfg.build(), series_control(), seed=seed)
    sys.stdout.write(report.format())
    return EXIT_OK if report.passed else EXIT_ROW_ERRORS


def main(argv=None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)

    # Check dependencies first
    if not check_dependencies():
        return EXIT_CONFIG_ERROR

    if args.command == "list-presets":
        return cmd_list_presets(args)

    from logger import run_label, setup_logging
    from specfun import SatsecError
    from config_handler import ConfigError
    run_name = run_label(args.command, getattr(args, "preset", None), args.seed)
    log = setup_logging(args.log_dir, verbosity=args.verbose, debug=args.debug, run_name=run_name)
    log.debug(f"satsec {__version__}: {args.command}")

    try:
        if args.command == "run":
            return cmd_run(args, log)
        return cmd_validate(args, log)
    except ConfigError as e:
        log.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except SatsecError as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_ROW_ERRORS
    except OSError as e:
        log.error(f"I/O error: {e}")
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
