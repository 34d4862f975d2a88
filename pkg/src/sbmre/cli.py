"""Command-line entry point for sweeps, adaptive runs and the demo."""

from __future__ import annotations

import argparse
import sys

from .adaptive import AdaptiveConfig
from .errors import ConfigError, InsufficientDataError, NumericalError
from .harness import (
    ALGORITHMS,
    ExperimentSpec,
    SweepAxis,
    export,
    export_trace,
    run_adaptive_experiment,
    run_sweep,
    reference_config,
)
from .model import SystemConfig


def _parse_values(text: str, integer: bool = False):
    """Parse a sweep grid: 'a:b:step' (inclusive of b) or a comma list."""
    def convert(token):
        v = float(token)
        if integer:
            if v != int(v):
                raise ConfigError(f"expected an integer, got {token!r}")
            return int(v)
        return v

    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range {text!r} must have the form a:b:step")
            a, b, step = (convert(p) for p in parts)
            if step <= 0:
                raise ConfigError(f"range step must be positive, got {step}")
            if b < a:
                raise ConfigError(f"empty range {text!r}")
            values = []
            v = a
            while v <= b + 1e-9 * max(abs(b), 1.0):
                values.append(int(round(v)) if integer else v)
                v += step
            return tuple(values)
        return tuple(convert(p) for p in text.split(",") if p != "")
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc}") from exc


def _parse_algos(text: str):
    algos = tuple(a.strip().upper() for a in text.split(",") if a.strip())
    unknown = [a for a in algos if a not in ALGORITHMS]
    if unknown:
        raise ConfigError(
            f"unknown algorithms: {', '.join(unknown)} (choose from {', '.join(ALGORITHMS)})"
        )
    # Canonical order keeps export row order stable for any input order.
    return tuple(a for a in ALGORITHMS if a in algos)


def _load_config(args) -> SystemConfig:
    if args.config is not None:
        cfg = SystemConfig.from_json(args.config)
    else:
        cfg = reference_config()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _build_spec(args, sweep=None, algos=None) -> ExperimentSpec:
    cfg = _load_config(args)
    return ExperimentSpec(
        base=cfg,
        algorithms=algos if algos is not None else _parse_algos(args.algos),
        frames=args.frames,
        sweep=sweep,
        master_seed=args.seed,
    )


def _print_table(result, axis_name: str):
    algos = list(dict.fromkeys(row.algo for row in result.rows))
    points = list(dict.fromkeys(
        (row.snr_db, row.n_pilots, row.lam) for row in result.rows
    ))
    by_key = {(r.algo, r.snr_db, r.n_pilots, r.lam): r for r in result.rows}
    label = {"snr_db": "snr_db", "np": "np", "lambda": "lambda"}[axis_name]
    print(f"{label:>10} " + " ".join(f"{a:>12}" for a in algos))
    for snr, n_p, lam in points:
        axis = {"snr_db": snr, "np": n_p, "lambda": lam}[axis_name]
        cells = " ".join(
            f"{by_key[(a, snr, n_p, lam)].ser:>12.4e}" for a in algos
        )
        axis_text = f"{axis:g}" if isinstance(axis, float) else str(axis)
        print(f"{axis_text:>10} " + cells)


def _cmd_sweep(args, axis_name: str, flag_value: str, integer: bool) -> int:
    values = _parse_values(flag_value, integer=integer)
    spec = _build_spec(args, sweep=SweepAxis(axis_name, values))
    result = run_sweep(spec, jobs=args.jobs)
    if args.out is not None:
        export(result, args.out, args.format)
    else:
        _print_table(result, axis_name)
    return 0


def _cmd_adaptive(args) -> int:
    algos = _parse_algos(args.algos)
    spec = _build_spec(args, algos=algos)
    acfg = AdaptiveConfig(
        target=args.target,
        delta1=args.delta1,
        np_min=spec.base.N,
        np_max=spec.base.N_s,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    state = run_adaptive_experiment(spec, acfg)
    if args.out is not None:
        export_trace(state, args.out, args.format)
    print(f"converged: np={state.np_effective} after {state.iterations} iterations")
    if state.history:
        last = state.history[-1]
        print(f"last measurement: np={last.n_pilots} ser={last.ser:.4e} loss={last.loss:+.3f}")
    return 0


def _cmd_demo(args) -> int:
    spec = _build_spec(args, sweep=SweepAxis("snr_db", (5.0, 10.0, 15.0)))
    result = run_sweep(spec, jobs=args.jobs)
    print(f"reference scenario, {spec.frames} frames per point, seed {spec.seed}")
    _print_table(result, "snr_db")
    if args.out is not None:
        export(result, args.out, args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbmre",
        description="Semi-blind mutually referenced equalizer simulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file (default: built-in reference)")
    common.add_argument("--frames", type=int, default=100,
                        help="Monte-Carlo frames per grid point")
    common.add_argument("--algos", default=",".join(ALGORITHMS),
                        help="comma-separated algorithm list")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--out", default=None, help="output file path")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("sweep-snr", parents=[common], help="sweep the operating SNR")
    p.add_argument("--snr", required=True, help="grid as a:b:step or v1,v2,...")

    p = sub.add_parser("sweep-pilots", parents=[common], help="sweep the pilot count")
    p.add_argument("--np", required=True, dest="np_grid", help="grid as a:b:step or v1,v2,...")

    p = sub.add_parser("sweep-lambda", parents=[common],
                       help="sweep the semi-blind regularization weight")
    p.add_argument("--lambda", required=True, dest="lambda_grid",
                   help="grid as a:b:step or v1,v2,...")

    p = sub.add_parser("adaptive", parents=[common],
                       help="run the adaptive pilot-count controller")
    p.add_argument("--target", type=float, default=1e-4, help="SER target")
    p.add_argument("--delta1", type=float, default=2.0, help="rise gain")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=0.1, help="loss convergence band")

    p = sub.add_parser("demo", parents=[common],
                       help="reference scenario at 5/10/15 dB, printed SER table")
    p.set_defaults(frames=200)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep-snr":
            return _cmd_sweep(args, "snr_db", args.snr, integer=False)
        if args.command == "sweep-pilots":
            return _cmd_sweep(args, "np", args.np_grid, integer=True)
        if args.command == "sweep-lambda":
            return _cmd_sweep(args, "lambda", args.lambda_grid, integer=False)
        if args.command == "adaptive":
            return _cmd_adaptive(args)
        if args.command == "demo":
            return _cmd_demo(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
