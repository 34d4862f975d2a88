"""QPSK decisions, error counting, stream bookkeeping, genie alignment."""

import numpy as np
import pytest

from sbmre.detection import (
    QPSK_ALPHABET,
    SerEstimate,
    Streams,
    compute_ser,
    genie_align,
    qpsk_detect,
)


def random_qpsk(rng, *shape):
    return QPSK_ALPHABET[rng.integers(0, 4, shape)]


def test_alphabet_is_unit_power():
    np.testing.assert_allclose(np.abs(QPSK_ALPHABET), 1.0, atol=1e-15)
    assert len(set(np.round(QPSK_ALPHABET, 12))) == 4


def test_detect_is_idempotent_on_constellation():
    z = QPSK_ALPHABET.reshape(1, 4)
    np.testing.assert_array_equal(qpsk_detect(z), z)


def test_detect_boundary_and_axes():
    # Ties resolve toward the positive quadrant: strict sign tests.
    z = np.array([[0.0 + 0.0j, 1.0 + 0.0j, 0.0 - 1.0j, -1e-12 + 1.0j]])
    out = qpsk_detect(z)
    root2 = np.sqrt(2.0)
    assert out[0, 0] == (1 + 1j) / root2
    assert out[0, 1] == (1 + 1j) / root2
    assert out[0, 2] == (1 - 1j) / root2
    assert out[0, 3] == (-1 + 1j) / root2


def test_detect_matches_nearest_point_oracle():
    rng = np.random.default_rng(41)
    z = rng.standard_normal((3, 500)) + 1j * rng.standard_normal((3, 500))
    out = qpsk_detect(z)
    dists = np.abs(z[..., None] - QPSK_ALPHABET[None, None, :])
    expected = QPSK_ALPHABET[np.argmin(dists, axis=-1)]
    np.testing.assert_array_equal(out, expected)


def test_detect_scale_invariant():
    rng = np.random.default_rng(42)
    z = rng.standard_normal((2, 100)) + 1j * rng.standard_normal((2, 100))
    np.testing.assert_array_equal(qpsk_detect(z), qpsk_detect(2.5 * z))


def test_ser_estimate_floor():
    est = SerEstimate(errors=0, total=448)
    assert est.ser == 0.0
    assert est.ser_floor == 1 / 448
    est = SerEstimate(errors=7, total=448)
    assert est.ser == est.ser_floor == 7 / 448


def test_streams_segment_and_bounds():
    values = np.arange(12, dtype=np.complex128).reshape(2, 6)
    s = Streams(start=10, values=values)
    seg = s.segment(range(12, 15))
    np.testing.assert_array_equal(seg, values[:, 2:5])
    with pytest.raises(ValueError):
        s.segment(range(9, 12))
    with pytest.raises(ValueError):
        s.segment(range(14, 17))


def test_compute_ser_counts_exact_mismatches():
    rng = np.random.default_rng(43)
    truth = Streams(0, random_qpsk(rng, 2, 30))
    est_values = truth.values.copy()
    est_values[0, 5] *= -1
    est_values[1, 7] *= 1j
    est = Streams(0, est_values)
    out = compute_ser(est, truth, range(0, 30))
    assert (out.errors, out.total) == (2, 60)


def test_genie_align_inverts_known_mixing():
    rng = np.random.default_rng(44)
    truth = Streams(0, random_qpsk(rng, 2, 200))
    q = np.array([[0.3 - 0.8j, 1.1 + 0.2j], [-0.5 + 0.1j, 0.9 - 0.4j]])
    mixed = Streams(0, q @ truth.values)
    region = range(20, 200)
    aligned, coeff = genie_align(mixed, truth, region)
    np.testing.assert_allclose(aligned.segment(region), truth.segment(region),
                               atol=1e-10)
    np.testing.assert_allclose(coeff @ q, np.eye(2), atol=1e-10)


def test_genie_align_resolves_permutation_and_phase():
    rng = np.random.default_rng(45)
    truth = Streams(0, random_qpsk(rng, 2, 150))
    swapped = Streams(0, np.vstack([1j * truth.values[1], -truth.values[0]]))
    region = range(0, 150)
    aligned, _ = genie_align(swapped, truth, region)
    np.testing.assert_allclose(aligned.values, truth.values, atol=1e-10)


def test_genie_aligned_detection_is_exact_over_many_mixes():
    rng = np.random.default_rng(46)
    region = range(10, 120)
    for _ in range(100):
        truth = Streams(0, random_qpsk(rng, 2, 120))
        q = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q += 2 * np.eye(2)  # keep it comfortably invertible
        mixed = Streams(0, q @ truth.values)
        aligned, _ = genie_align(mixed, truth, region)
        hard = qpsk_detect(aligned.segment(region))
        est = compute_ser(Streams(region.start, hard), truth, region)
        assert est.errors == 0
