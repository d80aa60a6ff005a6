import json
import os

import numpy as np

from chainsep.base.audio_io import read_wav
from chainsep.base.errors import ConfigError
from chainsep.base.tensor_container import read_tensor
from chainsep.helper.base_test import ChainsepBaseTest
from chainsep.simulation.scene import SceneParams, generate_source, generate_filters, mix_scene, write_scene, \
    simulate_scenes, envelope, MAX_DELAY


class SceneTests(ChainsepBaseTest):

    @classmethod
    def setUpClass(cls) -> None:
        cls.file = __file__
        super(SceneTests, cls).setUpClass()

    def test_source_reproducible(self):
        first = generate_source('am_noise', 1.0, seed=3)
        second = generate_source('am_noise', 1.0, seed=3)
        np.testing.assert_array_equal(first.samples, second.samples)
        self.assertAlmostEqual(float(np.sqrt(np.mean(first.samples ** 2))), 1.)
        self.assertFalse(np.array_equal(first.samples, generate_source('am_noise', 1.0, seed=4).samples))
        tones = generate_source('am_tones', 1.0, seed=3)
        self.assertEqual(tones.num_samples, 8000)

    def test_source_validation(self):
        with self.assertRaises(ConfigError):
            generate_source('am_noise', 0.2)
        with self.assertRaises(ConfigError):
            generate_source('speech', 1.0)

    def test_envelope_levels(self):
        values = envelope(8000, 8000, np.random.default_rng(0))
        self.assertEqual(values.shape, (8000,))
        self.assertTrue(np.all(values >= 0.05 - 1e-12))
        self.assertTrue(np.all(values <= 1. + 1e-12))

    def test_filters(self):
        params = SceneParams(channels=3, sources=2, mixing='instantaneous')
        gains = generate_filters(params, 0)
        self.assertEqual(gains.shape, (2, 3, 1))
        self.assertTrue(np.all((gains >= 0.5) & (gains <= 1.5)))

        delays = generate_filters(SceneParams(channels=3, sources=2, mixing='delays'), 0)
        self.assertEqual(delays.shape, (2, 3, MAX_DELAY + 1))
        np.testing.assert_array_equal(np.count_nonzero(delays, axis=-1), 1)

        params = SceneParams(channels=3, sources=2, rir_length=512, drr_db=6.)
        rirs = generate_filters(params, 0)
        self.assertEqual(rirs.shape, (2, 3, 512))
        for filt in rirs.reshape(-1, 512):
            direct = int(np.argmax(np.abs(filt) == 1.))
            self.assertLessEqual(direct, MAX_DELAY)
            self.assertTrue(np.all(filt[:direct] == 0.))
            self.assertAlmostEqual(np.sum(filt[direct + 1:] ** 2), 10 ** (-0.6))

    def test_noise_free_instantaneous(self):
        params = SceneParams(channels=2, sources=1, duration=1.0, mixing='instantaneous', snr_db=float('inf'))
        scene = mix_scene(params, seed=2)
        self.assertFalse(np.any(scene.noise.samples))
        expected = scene.sources[0].samples[:, 0][:, None] * scene.filters[0, :, 0][None]
        np.testing.assert_allclose(scene.mixture.samples, expected, atol=1e-12)

    def test_mixture_is_images_plus_noise(self):
        params = SceneParams(channels=3, sources=2, duration=1.0, rir_length=256, snr_db=10.)
        scene = mix_scene(params, seed=5)
        total = sum(image.samples for image in scene.images) + scene.noise.samples
        np.testing.assert_allclose(scene.mixture.samples, total)
        image_power = sum(np.mean(image.samples ** 2) for image in scene.images)
        self.assertAlmostEqual(10 * np.log10(image_power / np.mean(scene.noise.samples ** 2)), 10.)
        self.assertEqual(scene.reference_images(1).num_channels, 2)

    def test_scene_reproducible(self):
        params = SceneParams(channels=2, sources=2, duration=1.0, rir_length=128)
        np.testing.assert_array_equal(mix_scene(params, 9).mixture.samples, mix_scene(params, 9).mixture.samples)

    def test_sir(self):
        params = SceneParams(channels=2, sources=2, duration=1.0, mixing='instantaneous', sir_db=6.)
        scene = mix_scene(params, seed=1)
        ratio = np.mean(scene.sources[0].samples ** 2) / np.mean(scene.sources[1].samples ** 2)
        self.assertAlmostEqual(10 * np.log10(ratio), 6.)

    def test_invalid_params(self):
        with self.assertRaises(ConfigError):
            SceneParams(channels=1)
        with self.assertRaises(ConfigError):
            SceneParams(mixing='shoebox')

    def test_write_scene(self):
        params = SceneParams(channels=2, sources=2, duration=0.5, rir_length=64)
        scene = mix_scene(params, seed=0)
        directory = os.path.join(self.tmp_folder_path, 'written')
        write_scene(scene, directory)
        for name in ['mixture.wav', 'noise.wav', 'source_0.wav', 'image_1.wav', 'filters.bsst', 'scene.json']:
            self.assertTrue(os.path.isfile(os.path.join(directory, name)), name)
        self.assertEqual(read_wav(os.path.join(directory, 'mixture.wav')).num_channels, 2)
        np.testing.assert_array_equal(read_tensor(os.path.join(directory, 'filters.bsst')), scene.filters)
        with open(os.path.join(directory, 'scene.json')) as f:
            self.assertEqual(json.load(f)['params']['rir_length'], 64)

    def test_simulate_scenes(self):
        params = SceneParams(channels=2, sources=2, duration=0.5, rir_length=64)
        out = os.path.join(self.tmp_folder_path, 'corpus')
        directories = simulate_scenes(params, out, count=2, seed=10, processes=2)
        self.assertListEqual([os.path.basename(d) for d in directories], ['scene_000', 'scene_001'])
        second = read_wav(os.path.join(directories[1], 'mixture.wav'))
        expected = mix_scene(params, 11).mixture.samples.astype(np.float32)
        np.testing.assert_array_equal(second.samples, expected)
