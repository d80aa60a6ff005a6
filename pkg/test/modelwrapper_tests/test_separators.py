import unittest

import numpy as np
from sklearn.base import clone

from chainsep.base.signals import StftConfig
from chainsep.base.stft import stft
from chainsep.modelwrapper import CACGMMSeparator, OverIVASeparator
from chainsep.simulation.scene import SceneParams, mix_scene


class SeparatorTests(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        scene = mix_scene(SceneParams(channels=3, sources=2, duration=1.0, mixing='delays', snr_db=30.), seed=1)
        cls.spec = stft(scene.mixture, StftConfig(256))

    def test_cacgmm_separator(self):
        separator = CACGMMSeparator(num_sources=2, iterations=3)
        self.assertEqual(separator.num_classes, 3)
        estimates = separator.fit(self.spec).transform(self.spec)
        self.assertEqual(estimates.shape, self.spec.shape[:2] + (2,))
        self.assertEqual(len(separator.target_classes_), 2)
        report = separator.report()
        self.assertEqual(len(report['log_likelihood']), 4)
        self.assertEqual(len(report['reference_channels']), 2)
        self.assertIn('degenerate_bins', report)

    def test_cacgmm_without_noise_class(self):
        separator = CACGMMSeparator(num_sources=2, noise_class=False, iterations=2, extraction='mask_multiply')
        estimates = separator.fit_transform(self.spec)
        self.assertListEqual(separator.target_classes_, [0, 1])
        self.assertIsNone(separator.beamformers_)
        np.testing.assert_allclose(np.sum(estimates.data, axis=-1), self.spec.data[..., 0])

    def test_unknown_extraction(self):
        separator = CACGMMSeparator(iterations=1, extraction='wiener').fit(self.spec)
        with self.assertRaises(ValueError):
            separator.transform(self.spec)

    def test_overiva_separator(self):
        separator = OverIVASeparator(num_sources=2, iterations=3, init='pca')
        estimates = separator.fit(self.spec).transform(self.spec)
        np.testing.assert_allclose(estimates.data, separator.estimates_.data)
        self.assertEqual(separator.W_init_.shape, (129, 3, 3))
        report = separator.report()
        self.assertEqual(len(report['nll']), 4)
        self.assertEqual(report['ls_fallback_bins'], 0)

    def test_sklearn_params(self):
        separator = OverIVASeparator(num_sources=2, iterations=7)
        copy = clone(separator)
        self.assertEqual(copy.get_params()['iterations'], 7)
        copy.set_params(init='pca')
        self.assertEqual(copy.init, 'pca')
        self.assertEqual(CACGMMSeparator(seed=4).get_params()['seed'], 4)
