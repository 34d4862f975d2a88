"""Frequency-selective MIMO signal model.

T transmitters send i.i.d. unit-energy QPSK over L receive branches through
FIR channels with M + 1 i.i.d. CN(0, sigma_h2) taps.  The receiver stacks N
consecutive samples of every branch into observation windows

    x(n) = [x0(n) .. x0(n-N+1), x1(n) .. x1(n-N+1), ...]^T

so that x(n) = sum_t H_t sbar_t(n) + w(n) with banded block matrices H_t of
size L*N x K, K = M + N, and sbar_t(n) = [s_t(n) .. s_t(n-K+1)]^T.  Symbols
with negative index are zero (each frame starts from a silent channel).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .detection import QPSK_ALPHABET
from .errors import ConfigError

_REQUIRED_KEYS = ("T", "L", "M", "N", "N_s", "N_p", "snr_db", "lambda")
_OPTIONAL_KEYS = ("sigma_h2", "seed")


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters.

    T transmitters, L receive branches, channel memory M (M + 1 taps),
    window length N, frame length N_s symbols of which the first N_p are
    pilots, operating SNR in dB, regularization weight lam, channel tap
    variance sigma_h2, and the master seed.
    """

    T: int
    L: int
    M: int
    N: int
    N_s: int
    N_p: int
    snr_db: float
    lam: float
    sigma_h2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("T", "L", "N", "N_s", "N_p"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.M, int) or isinstance(self.M, bool) or self.M < 0:
            raise ConfigError(f"M must be a nonnegative integer, got {self.M!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not (self.N <= self.N_p <= self.N_s):
            raise ConfigError(
                f"pilot count must satisfy N <= N_p <= N_s, got "
                f"N={self.N}, N_p={self.N_p}, N_s={self.N_s}"
            )
        if not math.isfinite(self.snr_db):
            raise ConfigError(f"snr_db must be finite, got {self.snr_db!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lambda must be finite and nonnegative, got {self.lam!r}")
        if not (math.isfinite(self.sigma_h2) and self.sigma_h2 > 0):
            raise ConfigError(f"sigma_h2 must be finite and positive, got {self.sigma_h2!r}")

    @property
    def K(self):
        """Equalizer delay span per transmitter, K = M + N."""
        return self.M + self.N

    def check_identifiable(self):
        """Require L*N >= K*T so the stacked channel admits a left inverse."""
        if self.L * self.N < self.K * self.T:
            raise ConfigError(
                f"L*N = {self.L * self.N} < K*T = {self.K * self.T}; "
                f"no zero-forcing solution exists at these dimensions"
            )
        return self

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError(f"config document must be an object, got {type(doc).__name__}")
        allowed = set(_REQUIRED_KEYS) | set(_OPTIONAL_KEYS)
        unknown = sorted(set(doc) - allowed)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in _REQUIRED_KEYS if k not in doc)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        kwargs = {}
        for key in doc:
            value = doc[key]
            attr = "lam" if key == "lambda" else key
            if key in ("snr_db", "lambda", "sigma_h2"):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"config key {key} must be a number, got {value!r}")
                value = float(value)
            kwargs[attr] = value
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.check_identifiable()

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self):
        doc = dataclasses.asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ChannelSet:
    """FIR channel taps, shape (T, L, M + 1)."""

    taps: np.ndarray

    def __post_init__(self):
        if self.taps.ndim != 3:
            raise ValueError(f"taps must have shape (T, L, M + 1), got {self.taps.shape}")


@dataclass(frozen=True)
class StackedChannel:
    """Windowed channel matrix [H_0 .. H_{T-1}], shape (L*N, K*T).

    Column t*K + i maps symbol s_t(n - i) into the window x(n); column blocks
    are transmitter-major.
    """

    matrix: np.ndarray
    T: int
    K: int

    def block(self, t):
        """The L*N x K block H_t."""
        return self.matrix[:, t * self.K:(t + 1) * self.K]


@dataclass(frozen=True)
class Frame:
    """One transmission frame: symbols[t, n], the first n_pilots are pilots."""

    symbols: np.ndarray
    n_pilots: int

    @property
    def data_region(self):
        return range(self.n_pilots, self.symbols.shape[1])


@dataclass(frozen=True)
class ReceivedWindows:
    """Received branch samples plus their stacked observation windows.

    stream[l, n] is branch l at time n; windows[:, j] is x(N - 1 + j), so
    windows column j has entry stream[l, N - 1 + j - k] at row l*N + k.
    """

    stream: np.ndarray
    windows: np.ndarray
    start: int
    sigma2: float

    @property
    def n_windows(self):
        return self.windows.shape[1]


def draw_channel(cfg: SystemConfig, rng) -> ChannelSet:
    """Draw i.i.d. CN(0, sigma_h2) taps for every (transmitter, branch) pair."""
    shape = (cfg.T, cfg.L, cfg.M + 1)
    scale = math.sqrt(cfg.sigma_h2 / 2.0)
    taps = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return ChannelSet(taps)


def build_stacked_channel(ch: ChannelSet, N: int) -> StackedChannel:
    """Assemble the banded window-domain matrix [H_0 .. H_{T-1}]."""
    T, L, taps = ch.taps.shape[0], ch.taps.shape[1], ch.taps
    M = taps.shape[2] - 1
    K = M + N
    H = np.zeros((L * N, K * T), dtype=np.complex128)
    for t in range(T):
        for l in range(L):
            for k in range(N):
                H[l * N + k, t * K + k:t * K + k + M + 1] = taps[t, l]
    return StackedChannel(H, T=T, K=K)


def generate_frame(cfg: SystemConfig, rng) -> Frame:
    """Uniform i.i.d. QPSK frame of N_s symbols per transmitter."""
    idx = rng.integers(0, 4, size=(cfg.T, cfg.N_s))
    return Frame(QPSK_ALPHABET[idx], n_pilots=cfg.N_p)


def noise_variance_from_snr(cfg: SystemConfig) -> float:
    """Per-branch complex noise variance for the configured SNR.

    The mean received signal power per branch sample is T * (M + 1) * sigma_h2
    for unit-energy symbols, so sigma2 = T * (M + 1) * sigma_h2 / 10^(snr/10).
    """
    signal_power = cfg.T * (cfg.M + 1) * cfg.sigma_h2
    return signal_power / (10.0 ** (cfg.snr_db / 10.0))


def _stack_windows(stream: np.ndarray, N: int) -> np.ndarray:
    """Stacked windows x(N-1+j) for j = 0 .. N_s - N, shape (L*N, N_s - N + 1)."""
    L, n_s = stream.shape
    if n_s < N:
        raise ValueError(f"stream of length {n_s} shorter than window length {N}")
    per_branch = [sliding_window_view(stream[l], N)[:, ::-1].T for l in range(L)]
    return np.ascontiguousarray(np.concatenate(per_branch, axis=0))


def simulate_reception(cfg: SystemConfig, ch: ChannelSet, frame: Frame, sigma2: float,
                       rng) -> ReceivedWindows:
    """Convolve the frame through the channel, add noise, stack windows.

    The standard-normal noise block is drawn even for sigma2 = 0, so a fixed
    rng state yields the same realization at every noise level.
    """
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    if ch.taps.shape[:2] != (cfg.T, cfg.L):
        raise ValueError(f"channel shape {ch.taps.shape} does not match config")
    if frame.symbols.shape != (cfg.T, cfg.N_s):
        raise ValueError(f"frame shape {frame.symbols.shape} does not match config")
    stream = np.zeros((cfg.L, cfg.N_s), dtype=np.complex128)
    for t in range(cfg.T):
        for l in range(cfg.L):
            stream[l] += np.convolve(frame.symbols[t], ch.taps[t, l])[:cfg.N_s]
    w = rng.standard_normal((cfg.L, cfg.N_s)) + 1j * rng.standard_normal((cfg.L, cfg.N_s))
    stream = stream + math.sqrt(sigma2 / 2.0) * w
    return ReceivedWindows(
        stream=stream,
        windows=_stack_windows(stream, cfg.N),
        start=cfg.N - 1,
        sigma2=float(sigma2),
    )
