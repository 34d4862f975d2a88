"""Monte-Carlo experiment harness.

Runs frame-level simulations over parameter grids with paired realizations:
every algorithm at a grid point sees the same channels, symbols and noise.
Seeds derive from (master seed, point index, frame index), so results are
bit-identical for any worker count, and exports carry integer tallies plus
the floored error rate.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adaptive import AdaptiveConfig, AdaptiveState, run_adaptive
from .detection import SerEstimate, Streams, compute_ser, genie_align, qpsk_detect
from .equalizers import (
    EqMode,
    apply_bank,
    blind_mre_bank,
    estimate_mre_quadratic,
    mmse_equalizer,
    pilot_normal_ops,
    semi_blind_mre,
    zf_equalizer,
)
from .errors import ConfigError, InsufficientDataError
from .model import (
    SystemConfig,
    build_stacked_channel,
    draw_channel,
    generate_frame,
    noise_variance_from_snr,
    simulate_reception,
)

ALGORITHMS = ("ZF", "MMSE", "BMRE", "BMRE_RC", "SBMRE", "SBMRE_RC")
SWEEP_AXES = ("snr_db", "np", "lambda")
CSV_HEADER = ("algo", "snr_db", "np", "lambda", "frames", "symbols", "errors", "ser")
TRACE_HEADER = ("iter", "np", "ser", "loss")

_REDUCED_ALGOS = {"BMRE_RC", "SBMRE_RC"}
_BLIND_ALGOS = {"BMRE", "BMRE_RC"}
_SEMI_BLIND_ALGOS = {"SBMRE", "SBMRE_RC"}


def reference_config(**overrides) -> SystemConfig:
    """The reference scenario: 2x4 MIMO, 4-tap channels, N=10, 256-symbol
    frames with 32 pilots, lambda 0.1."""
    base = dict(T=2, L=4, M=3, N=10, N_s=256, N_p=32,
                snr_db=15.0, lam=0.1, sigma_h2=1.0, seed=0)
    base.update(overrides)
    return SystemConfig(**base)


@dataclass(frozen=True)
class SweepAxis:
    """One swept parameter: axis name and its grid values."""

    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.name!r}, expected one of {SWEEP_AXES}")
        if len(self.values) == 0:
            raise ConfigError("sweep axis has no values")


@dataclass(frozen=True)
class GridPoint:
    """One evaluated parameter combination."""

    index: int
    snr_db: float
    n_pilots: int
    lam: float


@dataclass(frozen=True)
class ExperimentSpec:
    """A full experiment: base scenario, algorithms, frame count, sweep."""

    base: SystemConfig
    algorithms: tuple = ALGORITHMS
    frames: int = 100
    sweep: SweepAxis = None
    master_seed: int = None
    noise_free: bool = False

    def __post_init__(self):
        if len(self.algorithms) == 0:
            raise ConfigError("no algorithms selected")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms: {', '.join(unknown)}")
        if self.frames < 1:
            raise ConfigError(f"frames must be at least 1, got {self.frames}")
        self.base.check_identifiable()

    @property
    def seed(self) -> int:
        return self.base.seed if self.master_seed is None else self.master_seed


@dataclass(frozen=True)
class ResultRow:
    """Aggregated tallies of one (algorithm, grid point) cell."""

    algo: str
    snr_db: float
    n_pilots: int
    lam: float
    frames: int
    symbols: int
    errors: int
    ser_sum: float = 0.0
    ser_sq_sum: float = 0.0

    @property
    def ser(self) -> float:
        """Floored error rate max(errors, 1) / symbols, as reported."""
        return max(self.errors, 1) / self.symbols

    @property
    def ser_raw(self) -> float:
        return self.errors / self.symbols

    @property
    def frame_ser_mean(self) -> float:
        return self.ser_sum / self.frames

    @property
    def frame_ser_se(self) -> float:
        """Standard error of the mean per-frame SER."""
        mean = self.frame_ser_mean
        var = max(self.ser_sq_sum / self.frames - mean * mean, 0.0)
        return (var / self.frames) ** 0.5


@dataclass
class ExperimentResult:
    rows: list
    metadata: dict = field(default_factory=dict)

    def row(self, algo: str, **point) -> ResultRow:
        """The unique row matching algo and any given point coordinates."""
        hits = [
            r for r in self.rows
            if r.algo == algo and all(getattr(r, k) == v for k, v in point.items())
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match algo={algo}, {point}")
        return hits[0]


def grid_points(spec: ExperimentSpec) -> list:
    """The evaluated grid: the base point, or one point per sweep value."""
    base = spec.base
    if spec.sweep is None:
        return [GridPoint(0, base.snr_db, base.N_p, base.lam)]
    points = []
    for i, v in enumerate(spec.sweep.values):
        snr, n_p, lam = base.snr_db, base.N_p, base.lam
        if spec.sweep.name == "snr_db":
            snr = float(v)
        elif spec.sweep.name == "np":
            n_p = int(v)
        else:
            lam = float(v)
        points.append(GridPoint(i, snr, n_p, lam))
    return points


def point_config(spec: ExperimentSpec, point: GridPoint) -> SystemConfig:
    return spec.base.replace(snr_db=point.snr_db, N_p=point.n_pilots, lam=point.lam)


def frame_rng(master_seed: int, point_index: int, frame: int):
    """Per-frame generator; independent of chunking and worker count."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, point_index, frame]))


def evaluate_frame(cfg: SystemConfig, algorithms, rng, noise_free=False) -> dict:
    """Simulate one frame and score every requested algorithm on it.

    All algorithms share the same channel, symbols and noise.  Blind banks
    are genie-aligned on the scored region before detection; trained and
    semi-blind banks are scored as produced.  Each bank is scored at its
    detection delay, over the part of the data region its output covers
    (a delay-d output cannot estimate the last d symbols of the frame).
    """
    ch = draw_channel(cfg, rng)
    frame = generate_frame(cfg, rng)
    sigma2 = 0.0 if noise_free else noise_variance_from_snr(cfg)
    x = simulate_reception(cfg, ch, frame, sigma2, rng)
    data = frame.data_region
    truth = Streams(0, frame.symbols)
    stacked = None
    quads = {}

    def quad(mode):
        if mode not in quads:
            quads[mode] = estimate_mre_quadratic(x, cfg, mode)
        return quads[mode]

    out = {}
    for algo in algorithms:
        mode = EqMode.REDUCED if algo in _REDUCED_ALGOS else EqMode.FULL
        if algo in ("ZF", "MMSE"):
            if stacked is None:
                stacked = build_stacked_channel(ch, cfg.N)
            bank = zf_equalizer(stacked) if algo == "ZF" else mmse_equalizer(stacked, sigma2)
        elif algo in _BLIND_ALGOS:
            bank = blind_mre_bank(quad(mode), cfg)
        elif algo in _SEMI_BLIND_ALGOS:
            ops = pilot_normal_ops(x, frame, cfg, mode)
            bank = semi_blind_mre(ops, quad(mode), cfg.lam, cfg)
        else:
            raise ConfigError(f"unknown algorithm {algo!r}")
        est = apply_bank(bank, x, bank.detection_delay)
        lo = max(data.start, est.start)
        hi = min(data.stop, est.start + est.values.shape[1])
        if hi <= lo:
            raise InsufficientDataError(
                f"no scorable data symbols at delay {bank.detection_delay} "
                f"with N_p={cfg.N_p}, N_s={cfg.N_s}"
            )
        region = range(lo, hi)
        if algo in _BLIND_ALGOS:
            est, _ = genie_align(est, truth, region)
        hard = qpsk_detect(est.segment(region))
        out[algo] = compute_ser(Streams(region.start, hard), truth, region)
    return out


def _zero_tallies(algorithms):
    return {a: [0, 0, 0, 0.0, 0.0] for a in algorithms}


def _accumulate(tallies, scores):
    for algo, est in scores.items():
        t = tallies[algo]
        t[0] += est.errors
        t[1] += est.total
        t[2] += 1
        t[3] += est.ser
        t[4] += est.ser * est.ser


def _eval_chunk(payload):
    """Worker body: evaluate frames [lo, hi) of one grid point."""
    spec, point, lo, hi = payload
    cfg = point_config(spec, point)
    tallies = _zero_tallies(spec.algorithms)
    for f in range(lo, hi):
        rng = frame_rng(spec.seed, point.index, f)
        try:
            scores = evaluate_frame(cfg, spec.algorithms, rng, spec.noise_free)
        except Exception as exc:
            raise RuntimeError(
                f"frame {f} of grid point {point.index} "
                f"(seed [{spec.seed}, {point.index}, {f}]) failed: {exc}"
            ) from exc
        _accumulate(tallies, scores)
    return tallies


def run_frames(spec: ExperimentSpec, point: GridPoint, jobs: int = 1) -> dict:
    """Evaluate all frames of one grid point; returns per-algorithm tallies
    [errors, symbols, frames, ser_sum, ser_sq_sum]."""
    if jobs <= 1 or spec.frames == 1:
        return _eval_chunk((spec, point, 0, spec.frames))
    bounds = np.linspace(0, spec.frames, jobs + 1).astype(int)
    payloads = [
        (spec, point, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
    ]
    tallies = _zero_tallies(spec.algorithms)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_eval_chunk, payloads):
            for algo, t in part.items():
                for k in range(5):
                    tallies[algo][k] += t[k]
    return tallies


def run_sweep(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Evaluate the whole grid; one result row per (algorithm, point)."""
    start = time.monotonic()
    rows = []
    for point in grid_points(spec):
        tallies = run_frames(spec, point, jobs)
        for algo in spec.algorithms:
            errors, symbols, frames, ser_sum, ser_sq = tallies[algo]
            rows.append(ResultRow(
                algo=algo, snr_db=point.snr_db, n_pilots=point.n_pilots,
                lam=point.lam, frames=frames, symbols=symbols, errors=errors,
                ser_sum=ser_sum, ser_sq_sum=ser_sq,
            ))
    metadata = {
        "master_seed": spec.seed,
        "frames_per_point": spec.frames,
        "algorithms": list(spec.algorithms),
        "noise_free": spec.noise_free,
        "sweep": None if spec.sweep is None else
                 {"name": spec.sweep.name, "values": list(spec.sweep.values)},
        "base": spec.base.to_dict(),
        "wall_time_s": time.monotonic() - start,
    }
    return ExperimentResult(rows=rows, metadata=metadata)


def run_adaptive_experiment(spec: ExperimentSpec, acfg: AdaptiveConfig) -> AdaptiveState:
    """Run the pilot-count controller against Monte-Carlo SER measurements.

    The spec must select exactly one semi-blind algorithm; every controller
    iteration measures spec.frames fresh frames at the current pilot count
    (seeded by iteration, so reruns are deterministic).
    """
    if len(spec.algorithms) != 1 or spec.algorithms[0] not in _SEMI_BLIND_ALGOS:
        raise ConfigError(
            f"adaptive runs need exactly one of {sorted(_SEMI_BLIND_ALGOS)}, "
            f"got {spec.algorithms}"
        )
    algo = spec.algorithms[0]
    calls = iter(range(acfg.max_iter + 1))

    def oracle(n_pilots: int) -> SerEstimate:
        iteration = next(calls)
        cfg = spec.base.replace(N_p=n_pilots)
        errors, symbols = 0, 0
        for f in range(spec.frames):
            rng = frame_rng(spec.seed, iteration, f)
            est = evaluate_frame(cfg, (algo,), rng, spec.noise_free)[algo]
            errors += est.errors
            symbols += est.total
        return SerEstimate(errors=errors, total=symbols)

    return run_adaptive(oracle, acfg)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _row_cells(row: ResultRow):
    return (row.algo, _fmt(row.snr_db), str(row.n_pilots), _fmt(row.lam),
            str(row.frames), str(row.symbols), str(row.errors), _fmt(row.ser))


def export(result: ExperimentResult, path, fmt: str = "csv"):
    """Write result rows as CSV (tallies only) or JSON (plus metadata)."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in result.rows:
                writer.writerow(_row_cells(row))
    elif fmt == "json":
        doc = {
            "metadata": result.metadata,
            "rows": [dict(zip(CSV_HEADER, (
                row.algo, row.snr_db, row.n_pilots, row.lam,
                row.frames, row.symbols, row.errors, row.ser,
            ))) for row in result.rows],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown export format {fmt!r}")


def export_trace(state: AdaptiveState, path, fmt: str = "csv"):
    """Write the controller history as iter/np/ser/loss records."""
    records = [
        (i + 1, rec.n_pilots, rec.ser, rec.loss)
        for i, rec in enumerate(state.history)
    ]
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for it, n_p, ser, loss in records:
                writer.writerow((str(it), str(n_p), _fmt(ser), _fmt(loss)))
    elif fmt == "json":
        doc = {
            "final_np": state.np_effective,
            "iterations": state.iterations,
            "trace": [dict(zip(TRACE_HEADER, r)) for r in records],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown export format {fmt!r}")
