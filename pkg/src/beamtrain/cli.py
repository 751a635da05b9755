"""Command-line front end.

Subcommands: ``pattern``, ``power-var``, ``quant-sweep``, ``overhead`` and
``train``.  All outputs are CSV files under ``--out``; plotting is left to
external tools.  Exit status is 0 on success and 2 on configuration
errors.  Set the BEAMTRAIN_LOG environment variable (debug/info/warning)
to control log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .experiment import ConfigError, ExperimentConfig, parse_config
from .protocols import Scheme

log = logging.getLogger("beamtrain")


def _setup_logging() -> None:
    level = os.environ.get("BEAMTRAIN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        text = Path(args.config).read_text()
        exp = parse_config(text)
    else:
        exp = ExperimentConfig()
    if getattr(args, "runs", None) is not None:
        exp = replace(exp, runs=args.runs)
    if getattr(args, "seed", None) is not None:
        exp = replace(exp, master_seed=args.seed)
    if getattr(args, "out", None) is not None:
        exp = replace(exp, out_dir=args.out)
    return exp


def _parse_float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip()]


def _parse_sign_list(raw: str) -> list[int]:
    out = []
    for v in raw.split(","):
        v = v.strip()
        if v in ("+", "+1", "1"):
            out.append(1)
        elif v in ("-", "-1"):
            out.append(-1)
        elif v:
            raise ConfigError(f"signs must be +1 or -1, got {v!r}")
    return out


def cmd_pattern(args: argparse.Namespace) -> int:
    if (args.angles is None) == (args.dft_beams is None):
        raise ConfigError("pass exactly one of --angles or --dft-beams")
    if args.dft_beams is not None:
        from .array_model import ArrayConfig, dft_codebook

        codebook = dft_codebook(ArrayConfig(args.antennas, args.spacing))
        indices = [int(v) for v in args.dft_beams.split(",") if v.strip()]
        if any(not 0 <= i < len(codebook) for i in indices):
            raise ConfigError(f"beam indices must lie in [0, {len(codebook) - 1}]")
        angles = [codebook.angles_deg[i] for i in indices]
    else:
        angles = _parse_float_list(args.angles)
    signs = _parse_sign_list(args.signs) if args.signs else None
    header, rows = harness.pattern_rows(
        num_antennas=args.antennas,
        spacing=args.spacing,
        angles_deg=angles,
        signs=signs,
        quant_bits=args.quant_bits,
        uniform=args.uniform,
        step_deg=args.step,
    )
    path = harness.write_csv(Path(args.out) / "pattern.csv", header, rows)
    print(f"wrote {path}")
    return 0


def cmd_power_var(args: argparse.Namespace) -> int:
    exp = _load_experiment(args)
    g_header, g_rows, c_header, c_rows = harness.power_var_campaign(exp)
    out = Path(exp.out_dir)
    p1 = harness.write_csv(out / "power_var_gamma.csv", g_header, g_rows)
    p2 = harness.write_csv(out / "power_var_cdf.csv", c_header, c_rows)
    print(f"wrote {p1}")
    print(f"wrote {p2}")
    return 0


def cmd_quant_sweep(args: argparse.Namespace) -> int:
    exp = _load_experiment(args)
    header, rows = harness.quant_sweep_campaign(exp)
    path = harness.write_csv(Path(exp.out_dir) / "quant_sweep.csv", header, rows)
    print(f"wrote {path}")
    return 0


def cmd_overhead(args: argparse.Namespace) -> int:
    counts = [int(v) for v in args.beams.split(",") if v.strip()]
    header, rows = harness.overhead_rows(counts)
    path = harness.write_csv(Path(args.out) / "overhead.csv", header, rows)
    print(f"wrote {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    exp = _load_experiment(args)
    try:
        scheme = Scheme(args.scheme)
    except ValueError:
        raise ConfigError(
            f"unknown scheme {args.scheme!r}; pick one of "
            + ", ".join(s.value for s in Scheme)
        ) from None
    summary, (header, rows) = harness.train_once(
        exp, scheme, seed=exp.master_seed, toy=args.toy
    )
    path = harness.write_csv(Path(exp.out_dir) / "train_trace.csv", header, rows)
    for key, value in summary.items():
        print(f"{key}: {value}")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamtrain",
        description="Beam training simulator: coded in-packet training versus "
        "standard-style sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="array pattern CSV for given weights")
    p.add_argument("--antennas", type=int, required=True)
    p.add_argument("--spacing", type=float, default=0.5)
    p.add_argument("--angles", default=None, help="comma-separated beam angles in degrees")
    p.add_argument(
        "--dft-beams", default=None, help="comma-separated beam indices into the DFT codebook"
    )
    p.add_argument("--signs", default=None, help="comma-separated +1/-1 per beam")
    p.add_argument("--quant-bits", type=int, default=None)
    p.add_argument("--uniform", action="store_true", help="project onto phase-only weights")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_pattern)

    for name, func in (("power-var", cmd_power_var), ("quant-sweep", cmd_quant_sweep)):
        p = sub.add_parser(name, help=f"run the {name} campaign")
        p.add_argument("--config", default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("overhead", help="training-bit accounting table")
    p.add_argument("--beams", default="1,16", help="comma-separated beam counts")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("train", help="single training run with trace dump")
    p.add_argument("--scheme", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--toy", action="store_true", help="use the 4-beam two-path toy scene")
    p.set_defaults(func=cmd_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
