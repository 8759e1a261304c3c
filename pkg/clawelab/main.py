#!/usr/bin/env python3
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .config import load_experiment_config
from .experiment import build_targets, run_experiment
from .pipeline.circuits import circuits_to_text, scalar_depth

EXPERIMENT_NAMES = {
    'overlap': 'Electronic overlap benchmark',
    'renyi': 'Rényi entropy benchmark (Bell-basis algorithm)',
    'calibrate-v1': 'CLAWE Variant I calibration',
    'calibrate-v2': 'CLAWE Variant II calibration',
    'zne': 'Zero-noise extrapolation sweep',
}


def run_command(args: argparse.Namespace) -> Path:
    """
    Load a config, apply command-line overrides and run the experiment.
    """
    cfg = load_experiment_config(args.config).with_overrides(
        seed=args.seed, shot_free=args.shot_free, output=args.out
    )

    print(f"\n{'='*60}")
    print(f"CLAWE Lab - {EXPERIMENT_NAMES[cfg.experiment]}")
    print(f"{'='*60}\n")
    mode = "shot-free" if cfg.shot_free else f"{cfg.n_shots} shots"
    print(f"Noise: {cfg.noise_kind}  |  Steps: {cfg.n_steps}  |  {mode}  |  Seed: {cfg.seed}\n")

    table = run_experiment(cfg, verbose=args.verbose)

    print(f"\n{'='*60}")
    print(f"✅ Success! {len(table)} rows written to:")
    print(f"   {cfg.output}")
    print(f"{'='*60}\n")
    return cfg.output


def dump_command(args: argparse.Namespace) -> None:
    cfg = load_experiment_config(args.config).with_overrides(seed=args.seed)
    circuits = build_targets(cfg)
    text = circuits_to_text(circuits)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        depths = ", ".join(str(scalar_depth(c)) for c in circuits)
        print(f"✅ Wrote {len(circuits)} circuits (scalar depths {depths}) to {args.out}")
    else:
        print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='clawe-lab',
        description='CLAWE Lab - noise mitigation experiments on a virtual noisy QPU',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  clawe-lab run configs/overlap.ini
  clawe-lab run configs/overlap.ini --shot-free --out outputs/overlap_exact.csv
  clawe-lab run configs/renyi.ini --seed 7
  clawe-lab dump-circuit configs/overlap.ini --out outputs/overlap_circuits.txt

Experiments (set with `kind` in the [experiment] section):
  overlap       - Electronic overlap with CLAWE I/II and ZNE
  renyi         - Rényi entropy via the Bell-basis algorithm
  calibrate-v1  - Variant I calibration trace
  calibrate-v2  - Variant II noise vector
  zne           - QCNA sweep with polynomial and Richardson fits
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='Run an experiment and write its CSV')
    run.add_argument('config', type=Path, help='Experiment config file (INI)')
    run.add_argument('--seed', type=int, help='Override the config seed')
    run.add_argument(
        '--shot-free',
        action='store_true',
        help='Compute expectations at density level instead of sampling shots'
    )
    run.add_argument('--out', '-o', type=Path, help='Output CSV path')
    run.add_argument('--verbose', '-v', action='store_true', help='Show progress bars')
    run.set_defaults(handler=run_command)

    dump = subparsers.add_parser('dump-circuit', help='Print the benchmark circuits as text')
    dump.add_argument('config', type=Path, help='Experiment config file (INI)')
    dump.add_argument('--seed', type=int, help='Override the config seed')
    dump.add_argument('--out', '-o', type=Path, help='Write circuits to this file instead of stdout')
    dump.set_defaults(handler=dump_command)
    return parser


def main(argv: Optional[List[str]] = None):
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        args.handler(args)
    except KeyboardInterrupt:
        print("\n\nInterrupted by user", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"\n❌ Error: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == '__main__':
    main()
