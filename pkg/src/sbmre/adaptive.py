"""Adaptive pilot-count controller.

Drives the number of pilot symbols toward the smallest count whose measured
SER meets a target: the log-domain loss L = log10(SER) - log10(target) scales
a multiplicative-increase (step delta1) / additive-decrease (step 1) update of
a continuous pilot count, whose ceiling, clamped to the configured bounds, is
the count actually used for the next measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class AdaptiveConfig:
    """Controller parameters: SER target, rise gain, bounds, stop rule."""

    target: float
    delta1: float
    np_min: int
    np_max: int
    tol: float = 0.1
    max_iter: int = 200

    def __post_init__(self):
        if not 0.0 < self.target < 1.0:
            raise ValueError(f"target must be in (0, 1), got {self.target}")
        if self.delta1 <= 0:
            raise ValueError(f"delta1 must be positive, got {self.delta1}")
        if self.np_min < 1 or self.np_max < self.np_min:
            raise ValueError(
                f"need 1 <= np_min <= np_max, got [{self.np_min}, {self.np_max}]"
            )
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class StepRecord:
    """One controller step: the pilot count measured at, its SER, the loss."""

    n_pilots: int
    ser: float
    loss: float


@dataclass(frozen=True)
class AdaptiveState:
    """Continuous pilot count, its clamped integer version, and the trace."""

    np_real: float
    np_effective: int
    iterations: int
    history: tuple


def initial_state(cfg: AdaptiveConfig) -> AdaptiveState:
    return AdaptiveState(
        np_real=float(cfg.np_min), np_effective=cfg.np_min, iterations=0, history=()
    )


def ser_loss(ser: float, target: float) -> float:
    """Log-domain miss L = log10(ser) - log10(target); needs ser, target > 0."""
    if not (ser > 0 and math.isfinite(ser)):
        raise ValueError(f"ser must be positive and finite, got {ser}")
    if not (target > 0 and math.isfinite(target)):
        raise ValueError(f"target must be positive and finite, got {target}")
    return math.log10(ser) - math.log10(target)


def _clamp_effective(np_real: float, cfg: AdaptiveConfig) -> int:
    return min(max(math.ceil(np_real), cfg.np_min), cfg.np_max)


def update_pilot_count(state: AdaptiveState, loss: float, cfg: AdaptiveConfig,
                       ser: float = None) -> AdaptiveState:
    """One controller update: np_real += step * loss, step 1 down, delta1 up.

    Records (pilot count measured at, ser, loss) in the history; when the
    measured SER is not supplied it is reconstructed from the loss.  np_real
    is left unclamped so pressure at a rail is remembered; only np_effective
    is clamped to [np_min, np_max].
    """
    if not math.isfinite(loss):
        raise ValueError(f"loss must be finite, got {loss}")
    step = 1.0 if loss < 0 else cfg.delta1
    np_real = state.np_real + step * loss
    record = StepRecord(
        n_pilots=state.np_effective,
        ser=float(ser) if ser is not None else cfg.target * 10.0 ** loss,
        loss=float(loss),
    )
    return AdaptiveState(
        np_real=np_real,
        np_effective=_clamp_effective(np_real, cfg),
        iterations=state.iterations + 1,
        history=state.history + (record,),
    )


def run_adaptive(oracle, cfg: AdaptiveConfig) -> AdaptiveState:
    """Iterate measure/update until the loss is small or max_iter is reached.

    oracle maps a pilot count to a measured SER (a SerEstimate, whose floored
    rate is used, or a bare positive float).  Convergence is three consecutive
    iterations with |loss| <= tol.
    """
    state = initial_state(cfg)
    streak = 0
    for _ in range(cfg.max_iter):
        measured = oracle(state.np_effective)
        ser = float(measured.ser_floor) if hasattr(measured, "ser_floor") else float(measured)
        loss = ser_loss(ser, cfg.target)
        state = update_pilot_count(state, loss, cfg, ser=ser)
        streak = streak + 1 if abs(loss) <= cfg.tol else 0
        if streak >= 3:
            break
    return state
