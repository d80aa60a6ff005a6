import unittest

import numpy as np

from chainsep.base.signals import StftConfig, MultichannelSpectrogram, SourceEstimates
from chainsep.helper.base_test import complex_normal
from chainsep.modelwrapper.initialization import init_identity, init_pca, pca_rows, ls_demixing_rows, \
    ls_init_from_estimates, InitSpec
from chainsep.modelwrapper.overiva import observation_covariance

TINY_STFT = StftConfig(4, 1)


class InitializationTests(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)
        self.spec = MultichannelSpectrogram(complex_normal((3, 200, 3), self.rng), TINY_STFT)

    def test_identity(self):
        W = init_identity(4, 3)
        self.assertEqual(W.shape, (4, 3, 3))
        np.testing.assert_array_equal(W[2], np.eye(3))

    def test_pca_rows(self):
        sigma = np.diag([4., 1.]).astype(complex)[None]
        np.testing.assert_allclose(pca_rows(sigma, 1), [[[1., 0.]]], atol=1e-12)

    def test_pca_square_is_unitary(self):
        sigma_y = observation_covariance(self.spec)
        W = init_pca(sigma_y, 3)
        for f in range(3):
            np.testing.assert_allclose(W[f] @ np.conj(W[f].T), np.eye(3), atol=1e-10)

    def test_pca_background_block(self):
        sigma_y = observation_covariance(self.spec)
        W = init_pca(sigma_y, 1)
        np.testing.assert_allclose(W[:, 1:, 1:], np.broadcast_to(-np.eye(2), (3, 2, 2)))
        np.testing.assert_allclose(W[:, 1:] @ sigma_y @ np.conj(np.swapaxes(W[:, :1], -1, -2)), 0., atol=1e-10)

    def test_least_squares_recovery(self):
        w0 = complex_normal((3, 2, 3), self.rng)
        estimates = SourceEstimates(np.einsum('fkm,ftm->ftk', w0, self.spec.data), TINY_STFT)
        rows, empty = ls_demixing_rows(self.spec, estimates)
        np.testing.assert_allclose(rows, w0, atol=1e-8)
        self.assertFalse(np.any(empty))

    def test_zero_estimates_fall_back_to_pca(self):
        data = np.einsum('km,ftm->ftk', np.eye(3)[:2], self.spec.data)
        data[1, :, 0] = 0.
        W_tilde, fallback = ls_init_from_estimates(self.spec, SourceEstimates(data, TINY_STFT))
        self.assertTrue(fallback[1, 0])
        self.assertEqual(int(np.sum(fallback)), 1)
        expected = pca_rows(observation_covariance(self.spec), 2)[1, 0]
        np.testing.assert_allclose(W_tilde[1, 0], expected)

    def test_config_mismatch(self):
        estimates = SourceEstimates(np.zeros((5, 200, 2)), StftConfig(8, 2))
        with self.assertRaises(ValueError):
            ls_demixing_rows(self.spec, estimates)

    def test_init_spec(self):
        self.assertEqual(InitSpec('identity').initial_demixing(self.spec).shape, (3, 3, 3))
        self.assertEqual(InitSpec('pca', source_count=2).initial_demixing(self.spec).shape, (3, 3, 3))
        with self.assertRaises(ValueError):
            InitSpec('from_estimates')
        with self.assertRaises(ValueError):
            InitSpec('from_estimates', SourceEstimates(np.zeros((3, 200, 1)), TINY_STFT), source_count=2)
        with self.assertRaises(ValueError):
            InitSpec('random')
