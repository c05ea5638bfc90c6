import math

import mpmath
import numpy as np
import pytest
from helpers import crandn, hard_threshold_oracle, kron_oracle, vec_oracle

from mmtrack.numerics import (
    RankDeficientError,
    bessel_j0,
    hard_threshold,
    khatri_rao,
    kron,
    least_squares,
    principal_svd,
    qr_rank_profile,
    unvectorize,
    vectorize,
    wrap_angle,
    wrapped_difference,
)


def test_kron_dimensions():
    assert kron(np.ones((2, 3)), np.ones((4, 5))).shape == (8, 15)


def test_kron_identity():
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))


def test_kron_hand_expanded():
    out = kron(np.array([[1], [2]]), np.array([[3], [4]]))
    np.testing.assert_array_equal(out, [[3], [4], [6], [8]])


def test_kron_matches_block_oracle(rng):
    a, b = crandn(rng, 3, 2), crandn(rng, 2, 4)
    np.testing.assert_allclose(kron(a, b), kron_oracle(a, b), rtol=0, atol=1e-14)


def test_khatri_rao_dimensions():
    assert khatri_rao(np.ones((3, 5)), np.ones((4, 5))).shape == (12, 5)


def test_khatri_rao_ones_stacks_second_factor(rng):
    b = crandn(rng, 4, 3)
    out = khatri_rao(np.ones((2, 3)), b)
    np.testing.assert_array_equal(out, np.vstack([b, b]))


def test_khatri_rao_columnwise_kron(rng):
    a, b = crandn(rng, 2, 2), crandn(rng, 2, 2)
    out = khatri_rao(a, b)
    for j in range(2):
        np.testing.assert_array_equal(out[:, j], kron_oracle(a[:, [j]], b[:, [j]])[:, 0])


def test_khatri_rao_column_mismatch():
    with pytest.raises(ValueError):
        khatri_rao(np.ones((2, 3)), np.ones((2, 4)))


def test_vectorize_stacks_columns():
    np.testing.assert_array_equal(vectorize(np.array([[1, 3], [2, 4]])), [1, 2, 3, 4])


def test_vectorize_measurement_length(rng):
    y = crandn(rng, 5, 7)  # M_R x M_T
    assert vectorize(y).shape == (35,)
    np.testing.assert_array_equal(vectorize(y), vec_oracle(y))
    np.testing.assert_array_equal(unvectorize(vectorize(y), 5, 7), y)


def test_vec_kron_identity_on_measurement_form(rng):
    w, h, f = crandn(rng, 3, 3), crandn(rng, 3, 3), crandn(rng, 3, 3)
    lhs = vectorize(w.conj().T @ h @ f)
    rhs = kron_oracle(f.T, w.conj().T) @ vec_oracle(h)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_least_squares_identity(rng):
    y = crandn(rng, 4)
    np.testing.assert_allclose(least_squares(np.eye(4), y), y, atol=1e-14)


def test_least_squares_planted(rng):
    a = crandn(rng, 4, 2)
    x = crandn(rng, 2)
    np.testing.assert_allclose(least_squares(a, a @ x), x, atol=1e-9)


def test_least_squares_matches_lstsq(rng):
    a, y = crandn(rng, 9, 3), crandn(rng, 9)
    np.testing.assert_allclose(least_squares(a, y), np.linalg.lstsq(a, y, rcond=None)[0], atol=1e-12)


def test_least_squares_orthogonal_rhs():
    a = np.array([[1, 0], [0, 1], [0, 0]], dtype=complex)
    np.testing.assert_allclose(least_squares(a, np.array([0, 0, 1.0 + 2j])), 0, atol=1e-15)


def test_least_squares_rank_deficient_raises(rng):
    c = crandn(rng, 5)
    a = np.column_stack([c, crandn(rng, 5), 2 * c])
    with pytest.raises(RankDeficientError) as err:
        least_squares(a, crandn(rng, 5))
    assert err.value.column == 2


def test_qr_rank_profile_flags_dependent_columns(rng):
    c = crandn(rng, 6)
    a = np.column_stack([c, crandn(rng, 6), 1j * c, crandn(rng, 6)])
    _, _, indep = qr_rank_profile(a)
    np.testing.assert_array_equal(indep, [True, True, False, True])


def test_principal_svd_diag():
    u, s, v = principal_svd(np.diag([3.0, 1.0]))
    assert s == pytest.approx(3.0)
    assert abs(abs(u[0]) - 1) < 1e-12 and abs(abs(v[0]) - 1) < 1e-12


def test_principal_svd_rank_one(rng):
    a, b = crandn(rng, 5), crandn(rng, 4)
    alpha = 0.7 - 1.2j
    h = alpha * np.outer(a, b.conj())
    _, s, _ = principal_svd(h)
    assert s == pytest.approx(abs(alpha) * np.linalg.norm(a) * np.linalg.norm(b), rel=1e-12)


def test_principal_svd_variational(rng):
    h = crandn(rng, 4, 3)
    u, s, v = principal_svd(h)
    assert abs(np.vdot(u, h @ v) - s) <= 1e-9 * s
    for _ in range(100):
        w = crandn(rng, 3)
        w /= np.linalg.norm(w)
        assert s >= np.linalg.norm(h @ w) - 1e-12


def test_principal_svd_phase_convention(rng):
    h = crandn(rng, 4, 4)
    _, _, v = principal_svd(h)
    first = v[np.flatnonzero(np.abs(v) > 0)[0]]
    assert abs(first.imag) < 1e-12 and first.real > 0


def test_principal_svd_zero_matrix():
    u, s, v = principal_svd(np.zeros((3, 2)))
    assert s == 0.0
    assert np.linalg.norm(u) == pytest.approx(1) and np.linalg.norm(v) == pytest.approx(1)


def test_bessel_j0_zero():
    assert bessel_j0(0.0) == 1.0


def test_bessel_j0_first_zero():
    assert abs(bessel_j0(2.404826)) < 1e-5


@pytest.mark.parametrize("x", np.linspace(-100, 100, 401))
def test_bessel_j0_against_mpmath(x):
    assert abs(bessel_j0(x) - float(mpmath.besselj(0, x))) <= 1e-10


def test_bessel_j0_correlation_point():
    # argument giving the time correlation used for the rate study
    x_star = float(mpmath.findroot(lambda t: mpmath.besselj(0, t) - mpmath.mpf("0.9037"), 0.6))
    assert bessel_j0(x_star) == pytest.approx(0.9037, abs=1e-10)


def test_hard_threshold_example():
    np.testing.assert_array_equal(hard_threshold(np.array([3, -1, 0.5]), 1), [3, 0, 0])


def test_hard_threshold_l_exceeds_length():
    v = np.array([1 + 1j, -2, 0.5])
    np.testing.assert_array_equal(hard_threshold(v, 5), v)


def test_hard_threshold_ties_lowest_index():
    v = np.array([1.0, -2.0, 2.0, 2.0, 0.1])
    np.testing.assert_array_equal(hard_threshold(v, 2), [0, -2.0, 2.0, 0, 0])


def test_hard_threshold_against_sort_oracle(rng):
    for _ in range(200):
        n = int(rng.integers(1, 40))
        # quantized magnitudes make ties common
        v = rng.integers(-4, 5, n) + 1j * rng.integers(-1, 2, n)
        l = int(rng.integers(1, n + 2))
        np.testing.assert_array_equal(hard_threshold(v, l), hard_threshold_oracle(v, l))


def test_wrap_angle_range():
    x = np.array([-1e-3, 0.0, 2 * math.pi, 7.0, -7.0])
    w = wrap_angle(x)
    assert np.all((w >= 0) & (w < 2 * math.pi))
    np.testing.assert_allclose(np.exp(1j * w), np.exp(1j * x), atol=1e-12)


def test_wrapped_difference_across_seam():
    assert wrapped_difference(0.01, 2 * math.pi - 0.01) == pytest.approx(0.02)


def test_qr_rank_profile_wide_matrix(rng):
    _, _, indep = qr_rank_profile(crandn(rng, 3, 5))
    np.testing.assert_array_equal(indep, [True, True, True, False, False])
