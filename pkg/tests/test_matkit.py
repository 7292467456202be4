import math

import numpy as np
import pytest

from iostab import matkit
from iostab.errors import (
    CapacityError,
    DimensionError,
    NoUniqueSolutionError,
)


def random_poly_of(M, rng, degree=2):
    coeffs = rng.uniform(-0.5, 0.5, degree + 1)
    out = np.zeros_like(M)
    for k, c in enumerate(coeffs):
        out += c * np.linalg.matrix_power(M, k)
    return out


class TestMatExp:
    def test_zero_matrix(self):
        assert np.allclose(matkit.mat_exp(np.zeros((2, 2))), np.eye(2))

    def test_diagonal(self):
        E = matkit.mat_exp(np.diag([1.0, -2.0]))
        assert np.allclose(E, np.diag([math.e, math.exp(-2.0)]), rtol=1e-12)

    def test_nilpotent_series_truncates(self):
        E = matkit.mat_exp(np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert np.allclose(E, np.array([[1.0, 1.0], [0.0, 1.0]]), atol=1e-15)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            matkit.mat_exp(np.ones((2, 3)))

    def test_commuting_product_rule(self, rng):
        for _ in range(20):
            M = rng.standard_normal((4, 4))
            M /= max(1.0, np.linalg.norm(M, 2))
            A = random_poly_of(M, rng)
            B = random_poly_of(M, rng)
            lhs = matkit.mat_exp(A + B)
            rhs = matkit.mat_exp(A) @ matkit.mat_exp(B)
            assert np.max(np.abs(lhs - rhs)) <= 1e-9

    def test_group_law(self, rng):
        for _ in range(20):
            A = rng.standard_normal((4, 4))
            A /= max(1.0, np.linalg.norm(A, 2))
            t, s = rng.uniform(0.0, 1.0, 2)
            lhs = matkit.mat_exp(A * (t + s))
            rhs = matkit.mat_exp(A * t) @ matkit.mat_exp(A * s)
            assert np.max(np.abs(lhs - rhs)) <= 1e-9


class TestSpectrum:
    def test_diagonal(self):
        eigs = np.sort(matkit.spectrum(np.diag([-1.0, -2.0])).real)
        assert np.allclose(eigs, [-2.0, -1.0], atol=1e-12)

    def test_companion_matches_quadratic_formula(self):
        # roots of s^2 + 3 s + 2 by the quadratic formula
        disc = math.sqrt(3.0 * 3.0 - 4.0 * 2.0)
        expected = sorted([(-3.0 - disc) / 2.0, (-3.0 + disc) / 2.0])
        eigs = np.sort(matkit.spectrum(np.array([[0.0, 1.0], [-2.0, -3.0]])).real)
        assert np.allclose(eigs, expected, atol=1e-10)

    def test_rotation_generator(self):
        eigs = np.sort_complex(matkit.spectrum(np.array([[0.0, 1.0], [-1.0, 0.0]])))
        assert np.allclose(eigs, [-1j, 1j], atol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            matkit.spectrum(np.ones((3, 2)))

    def test_kron_with_identity_repeats_spectrum(self, rng):
        from iostab.cli import multiset_distance

        for _ in range(10):
            A = rng.standard_normal((3, 3))
            m = int(rng.integers(2, 4))
            base = matkit.spectrum(A)
            lifted = matkit.spectrum(matkit.kron_product(A, np.eye(m)))
            assert multiset_distance(np.repeat(base, m), lifted) <= 1e-8


class TestPinv:
    def test_identity(self):
        assert np.allclose(matkit.pinv_svd(np.eye(3)), np.eye(3), atol=1e-14)

    def test_diagonal_with_zero(self):
        P = matkit.pinv_svd(np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert np.allclose(P, np.array([[0.5, 0.0], [0.0, 0.0]]), atol=1e-14)

    def test_column_vector_closed_form(self):
        A = np.array([[1.0], [1.0]])
        expected = np.linalg.inv(A.T @ A) @ A.T  # (A^T A)^{-1} A^T
        assert np.allclose(matkit.pinv_svd(A), expected, atol=1e-12)

    def test_penrose_identities_well_conditioned(self):
        A = np.array([[3.0, 1.0], [1.0, 2.0], [0.5, -1.0]])
        P = matkit.pinv_svd(A)
        assert np.max(np.abs(A @ P @ A - A)) <= 1e-10
        assert np.max(np.abs(P @ A @ P - P)) <= 1e-10
        assert np.max(np.abs((A @ P).T - A @ P)) <= 1e-10
        assert np.max(np.abs((P @ A).T - P @ A)) <= 1e-10

    def test_penrose_identities_random(self, rng):
        for _ in range(20):
            A = rng.standard_normal((8, 5))
            P = matkit.pinv_svd(A)
            assert np.max(np.abs(A @ P @ A - A)) <= 1e-9
            assert np.max(np.abs(P @ A @ P - P)) <= 1e-9
            assert np.max(np.abs((A @ P).T - A @ P)) <= 1e-9
            assert np.max(np.abs((P @ A).T - P @ A)) <= 1e-9


class TestCharPoly:
    def test_scalar(self):
        assert np.allclose(matkit.char_poly(np.array([[-3.0]])), [1.0, 3.0])

    def test_companion_reads_off_coefficients(self):
        coeffs = matkit.char_poly(np.array([[0.0, 1.0], [-2.0, -3.0]]))
        assert np.allclose(coeffs, [1.0, 3.0, 2.0], atol=1e-12)

    def test_distinct_diagonal(self):
        # expand (s-1)(s-2)(s-3) by convolution
        expected = np.polymul(np.polymul([1.0, -1.0], [1.0, -2.0]), [1.0, -3.0])
        coeffs = matkit.char_poly(np.diag([1.0, 2.0, 3.0]))
        assert np.allclose(coeffs, expected, atol=1e-12)

    def test_companion_inversion_property(self, rng):
        from iostab.filterbank import companion_from_tail
        from iostab.plant import poly_from_conjugate_roots

        for _ in range(20):
            n = int(rng.integers(1, 7))
            c = poly_from_conjugate_roots(rng, n, (-2.0, -0.2), (-1.0, 1.0))[1:]
            coeffs = matkit.char_poly(companion_from_tail(c))
            assert np.max(np.abs(coeffs - np.concatenate(([1.0], c)))) <= 1e-10

    def test_capacity_limit(self):
        with pytest.raises(CapacityError):
            matkit.char_poly(np.eye(65))


class TestSylvester:
    def test_scalar(self):
        X = matkit.solve_sylvester(np.array([[2.0]]), np.array([[3.0]]),
                                   np.array([[10.0]]))
        assert np.allclose(X, [[2.0]], atol=1e-12)

    def test_zero_a_identity_b(self, rng):
        C = rng.standard_normal((3, 3))
        X = matkit.solve_sylvester(np.zeros((3, 3)), np.eye(3), C)
        assert np.allclose(X, C, atol=1e-12)

    def test_diagonal_closed_form(self):
        A = np.diag([1.0, 2.0])
        B = np.diag([3.0, 4.0])
        C = np.ones((2, 2))
        expected = np.array([[1.0 / (a + b) for b in (3.0, 4.0)] for a in (1.0, 2.0)])
        assert np.allclose(matkit.solve_sylvester(A, B, C), expected, atol=1e-12)

    def test_spectra_overlap_rejected(self):
        with pytest.raises(NoUniqueSolutionError):
            matkit.solve_sylvester(np.array([[1.0]]), np.array([[-1.0]]),
                                   np.array([[1.0]]))

    def test_residual_bound_random_instances(self, rng):
        for _ in range(100):
            r = int(rng.integers(1, 8))
            c = int(rng.integers(1, 8))
            A = rng.standard_normal((r, r)) + 2.0 * np.eye(r)
            B = rng.standard_normal((c, c)) + 2.0 * np.eye(c)
            C = rng.standard_normal((r, c))
            X = matkit.solve_sylvester(A, B, C)
            residual = np.linalg.norm(X @ B + A @ X - C)
            bound = 1e-9 * (np.linalg.norm(A) + np.linalg.norm(B)) * max(
                np.linalg.norm(X), 1e-30
            )
            assert residual <= max(bound, 1e-12)


class TestStructuredBuilders:
    def test_kron_identity_right(self, rng):
        A = rng.standard_normal((2, 3))
        assert np.array_equal(matkit.kron_product(A, np.eye(1)), A)

    def test_kron_identity_left(self):
        K = matkit.kron_product(np.eye(2), np.array([[5.0]]))
        assert np.array_equal(K, np.diag([5.0, 5.0]))

    def test_kron_block_swap(self):
        S = np.array([[0.0, 1.0], [1.0, 0.0]])
        K = matkit.kron_product(S, np.eye(2))
        expected = np.zeros((4, 4))
        expected[:2, 2:] = np.eye(2)
        expected[2:, :2] = np.eye(2)
        assert np.array_equal(K, expected)

    def test_hankel_scalar(self):
        H = matkit.build_hankel([1.0, 2.0, 3.0, 4.0], 2)
        assert np.array_equal(H, np.array([[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]))

    def test_hankel_depth_one(self):
        H = matkit.build_hankel([1.0, 2.0, 3.0], 1)
        assert np.array_equal(H, np.array([[1.0, 2.0, 3.0]]))

    def test_hankel_block(self):
        seq = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        H = matkit.build_hankel(seq, 2)
        assert H.shape == (4, 2)
        assert np.array_equal(H[:, 0], [1.0, 2.0, 3.0, 4.0])
        assert np.array_equal(H[:, 1], [3.0, 4.0, 5.0, 6.0])

    def test_hankel_too_short(self):
        with pytest.raises(DimensionError):
            matkit.build_hankel([1.0, 2.0], 3)

    def test_toeplitz_identity(self):
        assert np.array_equal(matkit.build_toeplitz_lower([1.0], 3, 3), np.eye(3))

    def test_toeplitz_two_band(self):
        T = matkit.build_toeplitz_lower([2.0, 5.0], 3, 2)
        assert np.array_equal(T, np.array([[2.0, 0.0], [5.0, 2.0], [0.0, 5.0]]))

    def test_toeplitz_wide_needs_flag(self):
        with pytest.raises(DimensionError):
            matkit.build_toeplitz_lower([1.0], 2, 3)
        T = matkit.build_toeplitz_lower([1.0], 2, 3, allow_wide=True)
        assert T.shape == (2, 3)


class TestNumericalRank:
    def test_identity(self):
        assert matkit.numerical_rank(np.eye(3)) == 3

    def test_proportional_rows(self):
        assert matkit.numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1

    def test_auto_threshold_decision(self):
        # Auto threshold is max(rows, cols) * eps * sigma_max; compare the
        # second singular value against it on both sides.
        eps = np.finfo(float).eps
        cutoff = 2 * eps * 1.0
        sigma_above = 1e-15
        assert sigma_above > cutoff
        assert matkit.numerical_rank(np.diag([1.0, sigma_above])) == 2
        sigma_below = 1e-17
        assert sigma_below < cutoff
        assert matkit.numerical_rank(np.diag([1.0, sigma_below])) == 1

    def test_explicit_tolerance(self):
        assert matkit.numerical_rank(np.diag([1.0, 1e-6]), tol=1e-3) == 1
