"""QPSK mapping, hard detection, genie alignment and error counting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import least_squares

# Unit-energy QPSK alphabet; index bit 1 = negative real, bit 0 = negative imag.
QPSK_ALPHABET = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class Streams:
    """T parallel symbol streams with a common starting symbol index.

    values[t, j] is the (estimated or true) symbol of transmitter t at symbol
    index start + j.
    """

    start: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"stream values must be 2-dimensional, got {self.values.shape}")

    @property
    def stop(self):
        return self.start + self.values.shape[1]

    def segment(self, region: range):
        """The block of samples covering symbol indices in region."""
        if region.step != 1:
            raise ValueError("region must have step 1")
        if len(region) == 0:
            raise ValueError("region is empty")
        if region.start < self.start or region.stop > self.stop:
            raise ValueError(
                f"region [{region.start}, {region.stop}) outside stream "
                f"coverage [{self.start}, {self.stop})"
            )
        lo = region.start - self.start
        return self.values[:, lo:lo + len(region)]


@dataclass(frozen=True)
class SerEstimate:
    """Symbol error tally over a scored region."""

    errors: int
    total: int

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("total must be at least 1")
        if not 0 <= self.errors <= self.total:
            raise ValueError(f"errors {self.errors} outside [0, {self.total}]")

    @property
    def ser(self):
        return self.errors / self.total

    @property
    def ser_floor(self):
        """Error rate with a one-error floor, usable inside log10."""
        return max(self.errors, 1) / self.total


def qpsk_detect(z):
    """Per-sample nearest QPSK symbol; boundary samples round toward +1/+1j."""
    z = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(z)):
        raise ValueError("samples contain non-finite entries")
    idx = (z.real < 0).astype(np.intp) * 2 + (z.imag < 0).astype(np.intp)
    return QPSK_ALPHABET[idx]


def genie_align(est: Streams, truth: Streams, region: range):
    """Least-squares T x T alignment of estimated streams against the truth.

    Resolves the blind permutation/scale ambiguity.  Returns the aligned
    streams restricted to region, plus the mixing matrix c (aligned = c @ est).
    """
    z = est.segment(region)
    s = truth.segment(region)
    if z.shape[0] != s.shape[0]:
        raise ValueError(f"stream counts differ: {z.shape[0]} vs {s.shape[0]}")
    if len(region) < z.shape[0]:
        raise ValueError("region shorter than the number of streams")
    # min_c |s - c z|_F column-wise: solve z^T c^T = s^T in the LS sense.
    c = least_squares(z.T, s.T).T
    return Streams(region.start, c @ z), c


def compute_ser(detected: Streams, truth: Streams, region: range):
    """Exact symbol comparison over region.  Inputs must be hard decisions."""
    d = detected.segment(region)
    s = truth.segment(region)
    if d.shape != s.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {s.shape}")
    errors = int(np.count_nonzero(d != s))
    return SerEstimate(errors=errors, total=d.size)
