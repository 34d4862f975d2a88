"""Mutually referenced equalizers: blind, semi-blind and trained baselines.

A bank holds one FIR equalizer g_{t,i} of length L*N per output chain t and
delay i, applied as g^H x(n) to estimate s_t(n - i).  Successive delays of a
chain reference each other through the cross relation

    g_{t,i}^H x(n) = g_{t,i+1}^H x(n + 1),

whose sample quadratic form Rhat is minimized by the blind criterion and used
as the regularizer of the closed-form semi-blind solver.  The reduced variant
keeps only the first and last delay of every chain and references them at lag
K - 1.

Vector layouts: the cross-relation quadratic form is assembled delay-major
(slot i*T + t holds g_{t,i}), while pilot operators and banks order slots
transmitter-major (slot t*D + i).  Both layouts block by the equalizer length
L*N; permutation helpers convert between them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .detection import Streams
from .errors import InsufficientDataError, NumericalError
from .linalg import (
    _cholesky_solve,
    hermitian_smallest_eigpair,
    solve_hpd,
)
from .model import Frame, ReceivedWindows, StackedChannel, SystemConfig

# Relative eigenvalue threshold declaring the blind criterion degenerate.
NULLSPACE_RTOL = 1e-9


class EqMode(enum.Enum):
    """Equalizer bank layout: all K delays per chain, or the outer two."""

    FULL = "full"
    REDUCED = "reduced"

    def delays(self, K: int) -> tuple:
        if self is EqMode.FULL:
            return tuple(range(K))
        if K < 2:
            raise ValueError(f"reduced mode needs K >= 2, got K={K}")
        return (0, K - 1)

    def n_delays(self, K: int) -> int:
        return len(self.delays(K))

    def lag(self, K: int) -> int:
        """Window offset between the two sides of the cross relation."""
        return 1 if self is EqMode.FULL else K - 1


@dataclass(frozen=True)
class EqualizerBank:
    """Equalizer columns, transmitter-major: column t*D + j is g_{t, delays[j]}."""

    mode: EqMode
    matrix: np.ndarray
    T: int
    delays: tuple

    def __post_init__(self):
        expected = self.T * len(self.delays)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != expected:
            raise ValueError(
                f"bank matrix shape {self.matrix.shape} does not match "
                f"{self.T} chains with {len(self.delays)} delays"
            )

    def column(self, t: int, delay: int):
        j = self.delays.index(delay)
        return self.matrix[:, t * len(self.delays) + j]

    @property
    def detection_delay(self) -> int:
        """Delay of the one output used for symbol decisions.

        A full bank detects at its central delay, where the estimated
        symbol sits mid-window and is covered by the most received
        samples; the edge delays appear in only L samples each and their
        error floors are orders of magnitude higher.  A reduced bank only
        has the two edge outputs and uses the zero-delay one.
        """
        if self.mode is EqMode.FULL:
            return self.delays[len(self.delays) // 2]
        return self.delays[0]


@dataclass(frozen=True)
class MreQuadratic:
    """Sample cross-relation quadratic form, delay-major layout."""

    mode: EqMode
    matrix: np.ndarray
    sample_count: int

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PilotNormalOps:
    """Pilot normal-equation operators, transmitter-major layout.

    The full Gram operator is I_{D*T} kron gram_block with gram_block the
    pilot window Gram matrix; rhs stacks the pilot cross-correlations of every
    (chain, delay) slot.  Sums run over the N_p - N + 1 fully-pilot windows.
    """

    mode: EqMode
    gram_block: np.ndarray
    rhs: np.ndarray
    n_windows: int

    def gram(self):
        blocks = self.rhs.shape[0] // self.gram_block.shape[0]
        return np.kron(np.eye(blocks), self.gram_block)


def _dims(cfg: SystemConfig, mode: EqMode):
    """(per-slot length, slots per chain, chains) for the given mode."""
    return cfg.L * cfg.N, mode.n_delays(cfg.K), cfg.T


def delay_to_transmitter_perm(cfg: SystemConfig, mode: EqMode) -> np.ndarray:
    """Index array p with v_tm = v_dm[p]; p[(t*D + i)*LN + r] = (i*T + t)*LN + r."""
    ln, d, t = _dims(cfg, mode)
    chains = np.arange(t)[:, None, None]
    slots = np.arange(d)[None, :, None]
    offsets = np.arange(ln)[None, None, :]
    return ((slots * t + chains) * ln + offsets).reshape(-1)


def transmitter_major_matrix(m: np.ndarray, cfg: SystemConfig, mode: EqMode) -> np.ndarray:
    """Symmetrically permute a delay-major quadratic form to transmitter-major."""
    ln, d, t = _dims(cfg, mode)
    n = ln * d * t
    if m.shape != (n, n):
        raise ValueError(f"matrix shape {m.shape} does not match layout size {n}")
    six = m.reshape(d, t, ln, d, t, ln)
    return np.ascontiguousarray(six.transpose(1, 0, 2, 4, 3, 5).reshape(n, n))


def mre_constraint_rows(x_a, x_b, cfg: SystemConfig, mode: EqMode) -> np.ndarray:
    """Cross-relation rows of one window pair, delay-major columns.

    Row i*T + t constrains chain t between delays i and i + 1:
    g_{t,i}^H x_a = g_{t,i+1}^H x_b, where x_b lags x_a by mode.lag(K) windows.
    """
    ln, d, t_count = _dims(cfg, mode)
    x_a = np.asarray(x_a, dtype=np.complex128).reshape(-1)
    x_b = np.asarray(x_b, dtype=np.complex128).reshape(-1)
    if x_a.shape[0] != ln or x_b.shape[0] != ln:
        raise ValueError(f"window vectors must have length {ln}")
    rows = np.zeros((t_count * (d - 1), ln * d * t_count), dtype=np.complex128)
    for i in range(d - 1):
        for t in range(t_count):
            r = i * t_count + t
            a0 = (i * t_count + t) * ln
            b0 = ((i + 1) * t_count + t) * ln
            rows[r, a0:a0 + ln] = x_a.conj()
            rows[r, b0:b0 + ln] = -x_b.conj()
    return rows


def estimate_mre_quadratic(X: ReceivedWindows, cfg: SystemConfig,
                           mode: EqMode) -> MreQuadratic:
    """Average the cross-relation quadratic form over all valid window pairs.

    Assembled from the three window correlation matrices of the paired
    window sets instead of per-pair outer products; the result is exactly
    Hermitian and equals the naive accumulation.
    """
    ln, d, t_count = _dims(cfg, mode)
    w = X.windows
    if w.shape[0] != ln:
        raise ValueError(f"windows have {w.shape[0]} rows, expected {ln}")
    lag = mode.lag(cfg.K)
    pairs = w.shape[1] - lag
    if pairs < 1:
        raise InsufficientDataError(
            f"{w.shape[1]} windows provide no pairs at lag {lag}"
        )
    xa = w[:, :pairs]
    xb = w[:, lag:lag + pairs]
    caa = xa @ xa.conj().T
    cbb = xb @ xb.conj().T
    cab = xa @ xb.conj().T
    caa = 0.5 * (caa + caa.conj().T)
    cbb = 0.5 * (cbb + cbb.conj().T)
    n = ln * d * t_count
    r = np.zeros((n, n), dtype=np.complex128)
    for i in range(d - 1):
        for t in range(t_count):
            p = (i * t_count + t) * ln
            q = ((i + 1) * t_count + t) * ln
            r[p:p + ln, p:p + ln] += caa
            r[q:q + ln, q:q + ln] += cbb
            r[p:p + ln, q:q + ln] -= cab
            r[q:q + ln, p:p + ln] -= cab.conj().T
    r /= pairs
    return MreQuadratic(mode=mode, matrix=r, sample_count=pairs)


def _reference_matrix(frame: Frame, cfg: SystemConfig, mode: EqMode) -> np.ndarray:
    """Pilot reference rows: row t*D + j holds s_t(n - delays[j]) over the
    pilot windows n = N - 1 .. N_p - 1, with zeros for negative symbol index."""
    ln, d, t_count = _dims(cfg, mode)
    delays = mode.delays(cfg.K)
    n_idx = np.arange(cfg.N - 1, cfg.N_p)
    padded = np.zeros((t_count, cfg.K + cfg.N_s), dtype=np.complex128)
    padded[:, cfg.K:] = frame.symbols
    s = np.empty((t_count * d, n_idx.size), dtype=np.complex128)
    for j, delay in enumerate(delays):
        s[np.arange(t_count) * d + j, :] = padded[:, cfg.K + n_idx - delay]
    return s


def pilot_normal_ops(X: ReceivedWindows, frame: Frame, cfg: SystemConfig,
                     mode: EqMode) -> PilotNormalOps:
    """Pilot Gram block and stacked cross-correlation vector.

    Uses the windows x(N-1) .. x(N_p-1), the ones made entirely of pilot
    symbols (plus the zero prefix before the frame).
    """
    ln, d, t_count = _dims(cfg, mode)
    if X.windows.shape[0] != ln:
        raise ValueError(f"windows have {X.windows.shape[0]} rows, expected {ln}")
    npw = cfg.N_p - cfg.N + 1
    if X.windows.shape[1] < npw:
        raise ValueError(f"only {X.windows.shape[1]} windows for {npw} pilot windows")
    xt = X.windows[:, :npw]
    s = _reference_matrix(frame, cfg, mode)
    gram_block = xt @ xt.conj().T
    gram_block = 0.5 * (gram_block + gram_block.conj().T)
    rhs = np.ravel(xt @ s.conj().T, order="F")
    return PilotNormalOps(mode=mode, gram_block=gram_block, rhs=rhs, n_windows=npw)


def _chain_blocks(quad: MreQuadratic, cfg: SystemConfig):
    """Transmitter-major view of the quadratic form plus the chain block size.

    The cross relation never couples distinct chains, so the permuted matrix
    is block-diagonal with one D*L*N block per chain.
    """
    ln, d, t_count = _dims(cfg, quad.mode)
    rtm = transmitter_major_matrix(quad.matrix, cfg, quad.mode)
    return rtm, d * ln


def semi_blind_mre(ops: PilotNormalOps, quad: MreQuadratic, lam: float,
                   cfg: SystemConfig) -> EqualizerBank:
    """Closed-form semi-blind bank: minimize pilot misfit + lam * cross relation.

    Solves (A^H A + lam * P R P^H) g = A^H sbar in the transmitter-major
    layout, one positive-definite chain block at a time (the blocks are
    exactly decoupled), through solve_hpd and its ridge fallback.

    Both objective terms are sums of squared residuals: the pilot term over
    the pilot windows, the cross-relation term over all window pairs.  The
    stored quadratic form is the per-pair mean, so it enters the normal
    matrix multiplied by its sample count; lam then weighs two sums on the
    same per-equation footing.
    """
    if ops.mode is not quad.mode:
        raise ValueError(f"mode mismatch: pilot ops {ops.mode} vs quadratic {quad.mode}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    ln, d, t_count = _dims(cfg, ops.mode)
    rtm, bs = _chain_blocks(quad, cfg)
    if ops.rhs.shape[0] != bs * t_count:
        raise ValueError(f"pilot rhs length {ops.rhs.shape[0]}, expected {bs * t_count}")
    cols = np.empty((ln, t_count * d), dtype=np.complex128)
    for t in range(t_count):
        lo = t * bs
        m = (lam * quad.sample_count) * rtm[lo:lo + bs, lo:lo + bs]
        for i in range(d):
            m[i * ln:(i + 1) * ln, i * ln:(i + 1) * ln] += ops.gram_block
        g = solve_hpd(m, ops.rhs[lo:lo + bs])
        cols[:, t * d:(t + 1) * d] = g.reshape(d, ln).T
    return EqualizerBank(mode=ops.mode, matrix=cols, T=t_count,
                         delays=ops.mode.delays(cfg.K))


def blind_mre(quad: MreQuadratic, cfg: SystemConfig):
    """Global blind solution: unit-norm minimizer of the cross-relation form.

    Returns (g, bank) with g the smallest eigenvector in the delay-major
    layout and bank the same coefficients viewed as equalizer columns.
    """
    ln, d, t_count = _dims(cfg, quad.mode)
    _, g = hermitian_smallest_eigpair(quad.matrix)
    cols = np.empty((ln, t_count * d), dtype=np.complex128)
    for t in range(t_count):
        for i in range(d):
            cols[:, t * d + i] = g[(i * t_count + t) * ln:(i * t_count + t + 1) * ln]
    return g, EqualizerBank(mode=quad.mode, matrix=cols, T=t_count,
                            delays=quad.mode.delays(cfg.K))


def blind_mre_bank(quad: MreQuadratic, cfg: SystemConfig) -> EqualizerBank:
    """Blind evaluation bank: T minimizers of the cross-relation criterion
    with linearly independent outputs, one per output slot.

    The quadratic form never couples distinct chains and its chain blocks are
    identical, so the blind criterion determines a single low-Rayleigh
    subspace shared by all slots; any T vectors of it are minimizers, but
    slots must receive vectors with independent source mixtures or the genie
    alignment cannot separate the sources.  Candidates are therefore chosen
    per unit output energy: on degenerate (noise-free) data the epsilon-null
    basis of the chain block, otherwise the T smallest eigenvectors of the
    criterion relative to the output Gram I_D kron C_x, which filters
    orthogonal to the signal span cannot minimize.  The candidate basis is
    then rotated onto the eigenvectors of its delay-0 output Gram: rotated
    outputs are sample-uncorrelated, hence independent mixtures.
    """
    ln, d, t_count = _dims(cfg, quad.mode)
    rtm, bs = _chain_blocks(quad, cfg)
    block = rtm[:bs, :bs]
    if t_count > bs:
        raise ValueError(f"chain block of size {bs} cannot host {t_count} chains")
    # quad's first diagonal block is the leading-window correlation matrix.
    g0 = quad.matrix[:ln, :ln]
    thresh = NULLSPACE_RTOL * np.linalg.norm(block)
    vals, vecs = sla.eigh(block, subset_by_index=(0, min(t_count, bs) - 1))
    if vals[-1] <= thresh:
        vals, vecs = sla.eigh(block, subset_by_value=(-np.inf, thresh))
    else:
        weight = np.zeros((bs, bs), dtype=np.complex128)
        for i in range(d):
            weight[i * ln:(i + 1) * ln, i * ln:(i + 1) * ln] = g0
        try:
            vals, vecs = sla.eigh(block, weight, subset_by_index=(0, t_count - 1),
                                  driver="gvx")
        except sla.LinAlgError:
            # Output Gram numerically singular: fall back to the plain
            # smallest eigenvectors already at hand.
            pass
    v0 = vecs[:ln, :]
    s = v0.conj().T @ g0 @ v0
    s = 0.5 * (s + s.conj().T)
    _, y = sla.eigh(s)
    cols = np.empty((ln, t_count * d), dtype=np.complex128)
    for t in range(t_count):
        u = vecs @ y[:, -(t + 1)]
        norm = np.linalg.norm(u)
        if norm > 0:
            u = u / norm
        cols[:, t * d:(t + 1) * d] = u.reshape(d, ln).T
    return EqualizerBank(mode=quad.mode, matrix=cols, T=t_count,
                         delays=quad.mode.delays(cfg.K))


def zf_equalizer(H: StackedChannel) -> EqualizerBank:
    """Zero-forcing bank G = H (H^H H)^{-1}; requires a tall full-rank H."""
    m = H.matrix
    ln, kt = m.shape
    if ln < kt:
        raise ValueError(f"stacked channel {m.shape} admits no left inverse")
    gram = m.conj().T @ m
    gram = 0.5 * (gram + gram.conj().T)
    try:
        y = _cholesky_solve(gram, m.conj().T)
    except sla.LinAlgError as exc:
        raise NumericalError("stacked channel is rank deficient") from exc
    return EqualizerBank(mode=EqMode.FULL, matrix=y.conj().T, T=H.T,
                         delays=tuple(range(H.K)))


def mmse_equalizer(H: StackedChannel, sigma2: float) -> EqualizerBank:
    """Linear MMSE bank G = (H H^H + sigma2 I)^{-1} H; ZF when sigma2 = 0."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    if sigma2 == 0.0:
        return zf_equalizer(H)
    m = H.matrix
    cov = m @ m.conj().T + sigma2 * np.eye(m.shape[0])
    cov = 0.5 * (cov + cov.conj().T)
    g = _cholesky_solve(cov, m)
    return EqualizerBank(mode=EqMode.FULL, matrix=g, T=H.T,
                         delays=tuple(range(H.K)))


def apply_bank(bank: EqualizerBank, X: ReceivedWindows, delay: int) -> Streams:
    """Run every chain's delay-`delay` equalizer over all windows.

    Output sample j estimates s_t(X.start - delay + j), so the returned
    streams start at symbol index X.start - delay.
    """
    if delay not in bank.delays:
        raise ValueError(f"delay {delay} not in bank delays {bank.delays}")
    if bank.matrix.shape[0] != X.windows.shape[0]:
        raise ValueError(
            f"bank length {bank.matrix.shape[0]} does not match "
            f"window length {X.windows.shape[0]}"
        )
    d = len(bank.delays)
    j = bank.delays.index(delay)
    sub = bank.matrix[:, [t * d + j for t in range(bank.T)]]
    return Streams(start=X.start - delay, values=sub.conj().T @ X.windows)
