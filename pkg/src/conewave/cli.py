"""Command line front end for the experiment drivers.

Exit codes: 0 on success, 2 on configuration problems (bad TOML,
unknown keys, domain errors raised while setting a run up), 3 on
numerical-tolerance failures inside a run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from .experiments import ExperimentConfig, emit_report, run_experiment

_COMMANDS = ("decoupling", "blowup", "multiplier", "comparison", "calibrate", "lattice")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conewave",
        description="Run cone Besov experiments and write deterministic reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, default=None,
                        help="TOML file whose keys mirror ExperimentConfig fields")
        sp.add_argument("--out", type=Path, default=None,
                        help="output directory (default ./conewave_<command>)")
        sp.add_argument("--plot", action="store_true",
                        help="also write a trajectory.svg")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config is not None:
            with open(args.config, "rb") as fh:
                raw = tomllib.load(fh)
        declared = raw.get("experiment")
        if declared is not None and declared != args.command:
            raise ValueError(f"config declares experiment {declared!r} but the "
                             f"command line says {args.command!r}")
        raw["experiment"] = args.command
        cfg = ExperimentConfig.from_dict(raw)
    except (OSError, tomllib.TOMLDecodeError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_experiment(cfg)
        out_dir = args.out if args.out is not None else (
            Path(cfg.out_dir) if cfg.out_dir else Path.cwd() / f"conewave_{args.command}")
        paths = emit_report(report, out_dir, plot=args.plot)
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    bits = []
    for key in sorted(report.summary):
        val = report.summary[key]
        if isinstance(val, float):
            bits.append(f"{key}={val:.6g}")
        elif isinstance(val, (int, str, bool)):
            bits.append(f"{key}={val}")
    print(f"{args.command}: " + ", ".join(bits))
    for kind in sorted(paths):
        print(f"  {kind}: {paths[kind]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
