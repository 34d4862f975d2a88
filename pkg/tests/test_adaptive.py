"""Adaptive pilot-count controller: update rule, stop rule, frozen trace."""

import math

import pytest

from sbmre.adaptive import (
    AdaptiveConfig,
    AdaptiveState,
    initial_state,
    run_adaptive,
    ser_loss,
    update_pilot_count,
)
from sbmre.detection import SerEstimate

CFG = AdaptiveConfig(target=1e-4, delta1=2.0, np_min=10, np_max=200,
                     tol=0.1, max_iter=200)


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(target=0.0, delta1=2.0, np_min=10, np_max=200)
    with pytest.raises(ValueError):
        AdaptiveConfig(target=1e-4, delta1=-1.0, np_min=10, np_max=200)
    with pytest.raises(ValueError):
        AdaptiveConfig(target=1e-4, delta1=2.0, np_min=20, np_max=10)
    with pytest.raises(ValueError):
        AdaptiveConfig(target=1e-4, delta1=2.0, np_min=10, np_max=200, tol=0.0)
    with pytest.raises(ValueError):
        AdaptiveConfig(target=1e-4, delta1=2.0, np_min=10, np_max=200, max_iter=0)


def test_ser_loss_values():
    assert ser_loss(1e-2, 1e-4) == pytest.approx(2.0, abs=1e-12)
    assert ser_loss(1e-5, 1e-4) == pytest.approx(-1.0, abs=1e-12)
    assert ser_loss(1e-4, 1e-4) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        ser_loss(0.0, 1e-4)
    with pytest.raises(ValueError):
        ser_loss(math.nan, 1e-4)
    with pytest.raises(ValueError):
        ser_loss(1e-2, 0.0)


def test_update_increases_with_rise_gain():
    state = initial_state(CFG)
    out = update_pilot_count(state, 2.0, CFG)
    assert out.np_real == pytest.approx(14.0)  # 10 + delta1 * 2
    assert out.np_effective == 14
    assert out.iterations == 1
    assert out.history[-1].n_pilots == 10
    assert out.history[-1].loss == 2.0


def test_update_decreases_with_unit_gain_and_ceils():
    state = AdaptiveState(np_real=14.0, np_effective=14, iterations=3, history=())
    out = update_pilot_count(state, -0.5, CFG)
    assert out.np_real == pytest.approx(13.5)
    assert out.np_effective == 14  # ceil(13.5)
    with pytest.raises(ValueError):
        update_pilot_count(state, math.inf, CFG)


def test_clamping_keeps_effective_in_bounds_but_not_real():
    low = AdaptiveState(np_real=10.0, np_effective=10, iterations=0, history=())
    out = update_pilot_count(low, -5.0, CFG)
    assert out.np_real == pytest.approx(5.0)
    assert out.np_effective == CFG.np_min
    high = AdaptiveState(np_real=199.0, np_effective=199, iterations=0, history=())
    out = update_pilot_count(high, 4.0, CFG)
    assert out.np_real == pytest.approx(207.0)
    assert out.np_effective == CFG.np_max


def test_update_sign_matches_loss_sign():
    state = AdaptiveState(np_real=50.0, np_effective=50, iterations=0, history=())
    for loss in (0.3, 1.7, 4.0):
        assert update_pilot_count(state, loss, CFG).np_real > state.np_real
    for loss in (-0.3, -1.7, -4.0):
        assert update_pilot_count(state, loss, CFG).np_real < state.np_real
    assert update_pilot_count(state, 0.0, CFG).np_real == state.np_real


def test_rise_is_delta1_times_fall():
    state = AdaptiveState(np_real=50.0, np_effective=50, iterations=0, history=())
    up = update_pilot_count(state, 1.0, CFG).np_real - state.np_real
    down = state.np_real - update_pilot_count(state, -1.0, CFG).np_real
    assert up == pytest.approx(CFG.delta1 * down)


def test_run_adaptive_on_target_stops_after_streak_of_three():
    calls = []

    def oracle(n_pilots):
        calls.append(n_pilots)
        return CFG.target

    state = run_adaptive(oracle, CFG)
    assert state.iterations == 3
    assert calls == [10, 10, 10]
    assert all(rec.loss == 0.0 for rec in state.history)


def test_run_adaptive_does_not_stop_on_interrupted_streak():
    # Two in-tolerance measurements, a miss, then three in tolerance.
    losses = [0.05, 0.05, 0.5, 0.05, 0.05, 0.05]
    cfg = AdaptiveConfig(target=1e-2, delta1=2.0, np_min=10, np_max=200,
                         tol=0.1, max_iter=50)
    feed = iter(losses)

    def oracle(n_pilots):
        return cfg.target * 10.0 ** next(feed)

    state = run_adaptive(oracle, cfg)
    assert state.iterations == 6
    assert [round(rec.loss, 12) for rec in state.history] == losses


def test_run_adaptive_accepts_error_tallies():
    def oracle(n_pilots):
        return SerEstimate(errors=0, total=10000)

    state = run_adaptive(oracle, AdaptiveConfig(
        target=1e-4, delta1=2.0, np_min=10, np_max=200, tol=0.1, max_iter=5))
    assert state.history[0].ser == pytest.approx(1e-4)  # one-error floor
    assert state.iterations == 3  # floor sits exactly on target


def test_run_adaptive_respects_max_iter():
    cfg = AdaptiveConfig(target=1e-4, delta1=2.0, np_min=10, np_max=200,
                         tol=0.1, max_iter=7)
    state = run_adaptive(lambda n: 1e-1, cfg)  # never converges
    assert state.iterations == 7
    assert len(state.history) == 7


def test_run_adaptive_matches_hand_iteration_on_monotone_oracle():
    """SER decaying one decade per 10 pilots: replay the whole controller
    trajectory with an explicit loop and require an exact match."""
    def oracle(n_pilots):
        return 10.0 ** (-n_pilots / 10.0)

    state = run_adaptive(oracle, CFG)

    np_real = float(CFG.np_min)
    np_eff = CFG.np_min
    expected = []
    streak = 0
    for _ in range(CFG.max_iter):
        ser = 10.0 ** (-np_eff / 10.0)
        loss = math.log10(ser) - math.log10(CFG.target)
        expected.append((np_eff, ser, loss))
        step = 1.0 if loss < 0 else CFG.delta1
        np_real += step * loss
        np_eff = min(max(math.ceil(np_real), CFG.np_min), CFG.np_max)
        streak = streak + 1 if abs(loss) <= CFG.tol else 0
        if streak >= 3:
            break

    assert state.iterations == len(expected)
    for rec, (n, ser, loss) in zip(state.history, expected):
        assert rec.n_pilots == n
        assert rec.ser == pytest.approx(ser, rel=1e-12)
        assert rec.loss == pytest.approx(loss, abs=1e-12)
    assert state.np_effective == np_eff
    assert abs(state.history[-1].loss) <= CFG.tol


def test_bounded_oracle_never_leaves_rails():
    cfg = AdaptiveConfig(target=1e-3, delta1=3.0, np_min=12, np_max=20,
                         tol=0.05, max_iter=40)
    seen = []

    def oracle(n_pilots):
        seen.append(n_pilots)
        return 0.3  # persistent large miss pushes hard upward

    state = run_adaptive(oracle, cfg)
    assert all(cfg.np_min <= n <= cfg.np_max for n in seen)
    assert state.np_effective == cfg.np_max
    assert state.np_real > cfg.np_max  # pressure at the rail is retained
