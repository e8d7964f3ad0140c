"""Command-line front end.

One subcommand per experiment, a shared --config file, and per-parameter
overrides so sweeps and reproduction scripts do not need a config file per
point.  Exit codes: 0 success, 1 tracked tolerance exceeded (compare),
2 configuration error, 3 computation error.
"""

from __future__ import annotations

import argparse
import sys

from . import plotting
from .config import EXPERIMENTS, config_overrides, emit, load_config, parse_config
from .errors import ClassDError, ConfigError
from .experiments import RUNNERS

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_COMPUTE = 3

_PARAM_OVERRIDES = ("R", "L", "C", "T", "c1", "c2", "c3", "omega1")
_INT_OVERRIDES = ("transient_periods", "measure_periods", "n_max",
                  "samples_per_period", "jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classd",
        description="Third-order PWM class-D amplifier analysis toolkit",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH",
                       help="YAML experiment configuration")
        p.add_argument("--out", metavar="PATH", help="output data file")
        p.add_argument("--format", choices=("csv", "json"), dest="out_format")
        p.add_argument("--jobs", type=int, metavar="N",
                       help="worker processes for sweep points")
        p.add_argument("--no-plot", action="store_true",
                       help="skip the companion figure")
        for param in _PARAM_OVERRIDES:
            p.add_argument(f"--{param}", type=float, metavar="V",
                           help=f"override amplifier constant {param}")
        p.add_argument("--k", type=int, choices=(0, 1),
                       help="ripple compensation flag")
        p.add_argument("--u0", type=float, metavar="V",
                       help="constant operating point")
        for name_int in _INT_OVERRIDES:
            if name_int == "jobs":
                continue
            p.add_argument(f"--{name_int.replace('_', '-')}", type=int,
                           dest=name_int, metavar="N")
    return parser


_DEFAULT_DOC = {
    "params": {
        "R": 8.0, "L": 10e-6, "C": 0.5169e-6, "T": 1.0 / 384000.0,
        "c1": 1.3318e5, "c2": 1.3763e10, "c3": -1.0747e14,
        "omega1": 1.3195e5, "k": 0,
    },
    "input": {"kind": "sine", "amplitude": 0.8, "frequency": 1000.0},
}


def _build_config(args: argparse.Namespace):
    if args.config:
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            cfg = config_overrides(cfg, experiment=args.experiment)
    else:
        doc = dict(_DEFAULT_DOC)
        doc["experiment"] = args.experiment
        cfg = parse_config(doc)
    overrides = {}
    for name in (*_PARAM_OVERRIDES, "k", "u0", "jobs", "out_format",
                 *_INT_OVERRIDES):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.out:
        overrides["out_path"] = args.out
    if args.no_plot:
        overrides["plot"] = False
    return config_overrides(cfg, **overrides)


def _print_summary(records, metadata, limit: int = 12) -> None:
    for key in ("duty_cycle", "kappa", "spectral_radius", "stable",
                "skip_count", "thd", "thd_simulated", "leakage"):
        if key in metadata:
            print(f"{key} = {metadata[key]}")
    if not records:
        return
    columns: list = []
    for record in records:
        for key in record:
            if key not in columns:
                columns.append(key)
    print(" | ".join(str(c) for c in columns))
    for record in records[:limit]:
        print(" | ".join(_cell(record.get(c, "")) for c in columns))
    if len(records) > limit:
        print(f"... ({len(records)} rows total)")


def _cell(value) -> str:
    if isinstance(value, complex):
        return f"{value.real:+.6e}{value.imag:+.6e}j"
    if isinstance(value, float):
        return f"{value:+.6e}"
    return str(value)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runner = RUNNERS[cfg.experiment]
    try:
        records, metadata, ok = runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ClassDError as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE

    out_path = cfg.out_path or f"{cfg.experiment}.csv"
    try:
        emit(records, out_path, cfg.out_format, metadata)
    except OSError as exc:
        print(f"cannot write {out_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out_path}")
    if cfg.plot:
        figure = plotting.render(cfg.experiment, records, metadata, out_path)
        if figure is not None:
            print(f"wrote {figure}")
    _print_summary(records, metadata)

    if not ok:
        print("tolerance check FAILED", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
