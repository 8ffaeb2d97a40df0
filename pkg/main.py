#!/usr/bin/env python3
"""
Command-line entry point for the SQUID-terminated cavity simulator

Subcommands:
    spectrum   eigenfrequencies, mode masses and gap scans
    evolve     one driven run with particle numbers and growth fits
    sweep      particle numbers against drive frequency
    compare    fitted growth rates against the multiple-scale prediction
"""

import argparse
import logging
import sys
import os

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from experiment_config import load_config
from experiment_orchestrator import run_subcommand
from simulation_errors import SimulationError

logger = logging.getLogger(__name__)

# flag -> config key
FLAG_KEYS = {
    "out": "out_dir",
    "modes": "n_modes",
    "alpha": "alpha",
    "omega": "omega",
    "tf": "t_final",
    "tmax": "t_max",
    "dt": "dt",
    "init": "init",
    "workers": "workers",
    "b0_grid": "b0_grid",
    "chi0_grid": "chi0_grid",
    "sweep_omega": "sweep_omega",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Simulate particle creation in a SQUID-terminated cavity")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spectrum", "solve the static spectrum and gap profile"),
        ("evolve", "integrate one driven run"),
        ("sweep", "sweep the drive frequency"),
        ("compare", "compare fitted growth with the multiple-scale prediction"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="flat KEY=VALUE config file")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--modes", help="number of cavity modes")
        sub.add_argument("--alpha", help="drive strength in the mode equations")
        sub.add_argument("--omega", help="drive frequency, a number or e.g. 2k1, k1+k3")
        sub.add_argument("--tf", help="end of the drive window")
        sub.add_argument("--tmax", help="end of the simulation")
        sub.add_argument("--dt", help="integration step")
        sub.add_argument("--init", choices=["columns", "superposition"], help="initial data")
        sub.add_argument("--workers", help="parallel sweep workers")
        sub.add_argument("--b0-grid", dest="b0_grid", help="b0 scan, start:stop:count or comma list")
        sub.add_argument("--chi0-grid", dest="chi0_grid", help="chi0 values for the eigenfrequency scan")
        sub.add_argument("--sweep-omega", dest="sweep_omega", help="drive-frequency grid: a:b:n ranges, numbers or expressions such as 2k2")
        sub.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None) -> int:
    """Parse arguments, run the subcommand and map failures to exit codes"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse usage errors share the configuration exit code
        return 2 if e.code else 0

    try:
        overrides = {key: getattr(args, flag) for flag, key in FLAG_KEYS.items()}
        config = load_config(args.config, overrides)
        level = logging.DEBUG if args.verbose else getattr(logging, config.log_level.upper(), logging.INFO)
        logging.basicConfig(
            level=level,
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        logging.getLogger().setLevel(level)

        print(f"🚀 Running '{args.command}' ({config.source})")
        run_subcommand(args.command, config)
        print("✅ Done")
        return 0

    except SimulationError as e:
        logger.error(f"Error in {args.command}: {str(e)}")
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Error in main: {str(e)}")
        print(f"❌ Unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
