import unittest

import numpy as np

from chainsep.base.errors import NotPositiveDefinite, SingularMatrix
from chainsep.helper.base_test import random_spd, complex_normal
from chainsep.helper.hermitian_linalg import solve_hermitian, solve_general, eigh, load_diagonal, hermitize, \
    logdet_hermitian, log_abs_det, batched_solve_hermitian, batched_inv_hermitian, canonicalize_phase, is_singular


class HermitianLinalgTests(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_solve_hermitian(self):
        b = complex_normal(3, self.rng)
        np.testing.assert_allclose(solve_hermitian(np.eye(3), b), b)
        np.testing.assert_allclose(solve_hermitian(np.diag([2., 4.]), np.array([2., 4.])), [1., 1.])
        A = random_spd(4, self.rng)
        b = complex_normal(4, self.rng)
        np.testing.assert_allclose(A @ solve_hermitian(A, b), b, atol=1e-10)

    def test_solve_hermitian_indefinite(self):
        with self.assertRaises(NotPositiveDefinite):
            solve_hermitian(np.diag([1., -1.]), np.ones(2))

    def test_solve_general(self):
        np.testing.assert_allclose(solve_general(np.array([[0., 1.], [1., 0.]]), np.array([1., 2.])), [2., 1.])
        A = complex_normal((4, 4), self.rng) + 3 * np.eye(4)
        b = complex_normal(4, self.rng)
        np.testing.assert_allclose(A @ solve_general(A, b), b, atol=1e-10)
        with self.assertRaises(SingularMatrix):
            solve_general(np.array([[1., 2.], [2., 4.]]), np.ones(2))

    def test_solve_general_stack(self):
        A = complex_normal((5, 3, 3), self.rng) + 3 * np.eye(3)
        b = complex_normal((5, 3), self.rng)
        x = solve_general(A, b)
        self.assertEqual(x.shape, (5, 3))
        np.testing.assert_allclose(np.einsum('fmn,fn->fm', A, x), b, atol=1e-10)
        B = complex_normal((5, 3, 2), self.rng)
        np.testing.assert_allclose(A @ solve_general(A, B), B, atol=1e-10)
        A[3] = [[1., 2., 0.], [2., 4., 0.], [0., 0., 1.]]
        with self.assertRaises(SingularMatrix):
            solve_general(A, b)

    def test_is_singular_stack(self):
        stack = np.stack([np.eye(2), np.array([[1., 2.], [2., 4.]]), np.diag([1., 1e-14])])
        np.testing.assert_array_equal(is_singular(stack), [False, True, True])
        self.assertIs(is_singular(np.eye(2)), False)

    def test_eigh(self):
        values, vectors = eigh(np.diag([3., 1.]))
        np.testing.assert_allclose(values, [1., 3.])
        np.testing.assert_allclose(np.abs(vectors), [[0., 1.], [1., 0.]], atol=1e-12)
        values, _ = eigh(np.array([[2., 1.], [1., 2.]]))
        np.testing.assert_allclose(values, [1., 3.])

        A = hermitize(complex_normal((5, 5), self.rng))
        values, vectors = eigh(A)
        np.testing.assert_allclose(vectors @ np.diag(values) @ np.conj(vectors.T), A, atol=1e-8)

    def test_canonical_phase(self):
        A = random_spd(3, self.rng)
        _, vectors = eigh(A)
        pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(3)]
        np.testing.assert_allclose(np.imag(pivots), 0., atol=1e-12)
        self.assertTrue(np.all(np.real(pivots) > 0))
        # a global phase on the input vectors does not change the result
        np.testing.assert_allclose(canonicalize_phase(vectors * np.exp(1j * 0.7)), vectors, atol=1e-12)

    def test_load_diagonal(self):
        np.testing.assert_allclose(load_diagonal(np.eye(2), 0.1), 1.1 * np.eye(2))
        np.testing.assert_allclose(load_diagonal(np.zeros((2, 2)), 1e-6), 1e-6 * np.eye(2))
        stack = np.stack([np.eye(2), np.zeros((2, 2))])
        np.testing.assert_allclose(load_diagonal(stack, 0.1)[1], 0.1 * np.eye(2))
        with self.assertRaises(ValueError):
            load_diagonal(np.eye(2), -1.)

    def test_determinants(self):
        A = random_spd(4, self.rng)
        expected = np.log(np.real(np.linalg.det(A)))
        self.assertAlmostEqual(float(logdet_hermitian(A)), expected, places=8)
        self.assertAlmostEqual(float(log_abs_det(A)), expected, places=8)
        with self.assertRaises(NotPositiveDefinite):
            logdet_hermitian(-np.eye(2))

    def test_batched(self):
        A = np.stack([random_spd(3, self.rng) for _ in range(6)])
        b = complex_normal((6, 3), self.rng)
        x = batched_solve_hermitian(A, b)
        np.testing.assert_allclose(np.einsum('fmn,fn->fm', A, x), b, atol=1e-10)
        np.testing.assert_allclose(batched_inv_hermitian(A) @ A, np.broadcast_to(np.eye(3), A.shape), atol=1e-10)
