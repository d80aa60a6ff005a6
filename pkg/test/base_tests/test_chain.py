import os

import numpy as np

from chainsep.base.chain import ChainConfig, SeparationChain, stage
from chainsep.base.errors import ConfigError, StageError, SingularMatrix
from chainsep.base.signals import StftConfig, TimeSignal
from chainsep.base.stft import stft
from chainsep.base.tensor_container import read_tensor
from chainsep.helper.base_test import ChainsepBaseTest
from chainsep.modelwrapper.beamforming import beamform_from_masks
from chainsep.modelwrapper.cacgmm import run_cacgmm
from chainsep.modelwrapper.initialization import ls_demixing_rows
from chainsep.simulation.scene import SceneParams, mix_scene


class SeparationChainTests(ChainsepBaseTest):

    @classmethod
    def setUpClass(cls) -> None:
        cls.file = __file__
        super(SeparationChainTests, cls).setUpClass()
        params = SceneParams(channels=3, sources=2, duration=1.0, mixing='delays', snr_db=30.)
        cls.scene = mix_scene(params, seed=4)

    def chain_config(self, **kwargs) -> ChainConfig:
        settings = dict(num_sources=2, smm_stft=StftConfig(256), iva_stft=StftConfig(512), smm_iterations=3,
                        iva_iterations=3, seed=1)
        settings.update(kwargs)
        return ChainConfig(**settings)

    def test_output_contract(self):
        sources, report = SeparationChain(self.chain_config()).run_chain(self.scene.mixture)
        self.assertEqual(len(sources), 2)
        for source in sources:
            self.assertEqual(source.num_samples, self.scene.mixture.num_samples)
            self.assertEqual(source.num_channels, 1)
            self.assertTrue(np.all(np.isfinite(source.samples)))
        for key in ['cacgmm', 'overiva', 'seconds', 'input']:
            self.assertIn(key, report)
        self.assertIn('beamforming', report['seconds'])

    def test_deterministic(self):
        first, _ = SeparationChain(self.chain_config()).run_chain(self.scene.mixture)
        second, _ = SeparationChain(self.chain_config()).run_chain(self.scene.mixture)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_dumps_and_resume(self):
        dump_dir = os.path.join(self.tmp_folder_path, 'dump')
        chain = SeparationChain(self.chain_config(dump_dir=dump_dir))
        sources, _ = chain.run_chain(self.scene.mixture)
        for name in ['masks.bsst', 'beamformers.bsst', 'smm_estimates.bsst', 'W_init.bsst', 'W_final.bsst',
                     'smm_est_0.wav', 'est_1.wav']:
            self.assertTrue(os.path.isfile(os.path.join(dump_dir, name)), name)
        masks = read_tensor(os.path.join(dump_dir, 'masks.bsst'))
        self.assertEqual(masks.shape[:2], (129, stft(self.scene.mixture, StftConfig(256)).num_frames))
        self.assertEqual(masks.shape[2], 3)

        resumed, _ = SeparationChain(self.chain_config(dump_dir=dump_dir)).resume_iva(self.scene.mixture)
        for a, b in zip(sources, resumed):
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_mono_input(self):
        with self.assertRaises(ConfigError) as context:
            SeparationChain(self.chain_config()).run_chain(self.scene.mixture.channel(0))
        self.assertIn("at least two channels", str(context.exception))

    def test_single_algorithms(self):
        chain = SeparationChain(self.chain_config(iva_init='identity'))
        sources, report = chain.separate(self.scene.mixture, 'overiva')
        self.assertEqual(len(sources), 2)
        self.assertNotIn('cacgmm', report)
        sources, report = SeparationChain(self.chain_config()).separate(self.scene.mixture, 'cacgmm')
        self.assertEqual(len(sources), 2)
        self.assertNotIn('overiva', report)
        with self.assertRaises(ConfigError):
            SeparationChain(self.chain_config()).separate(self.scene.mixture, 'overiva')

    def test_config_errors_are_logged(self):
        with self.assertLogs('CHAINSEP', level='ERROR') as logs:
            with self.assertRaises(ConfigError):
                SeparationChain(self.chain_config()).separate(self.scene.mixture, 'ilrma')
            with self.assertRaises(ConfigError):
                self.chain_config(iva_init='random')
        self.assertIn("Unknown algorithm 'ilrma'", logs.output[0])
        self.assertIn("Unknown IVA init 'random'", logs.output[1])

    def test_oracle_init(self):
        chain = SeparationChain(self.chain_config(iva_init='oracle'))
        with self.assertRaises(ConfigError):
            chain.run_chain(self.scene.mixture)
        sources, report = chain.run_chain(self.scene.mixture, self.scene.reference_images(0))
        self.assertNotIn('cacgmm', report)
        self.assertEqual(len(sources), 2)

    def test_pre_stage(self):
        calls = list()

        def double(signal):
            calls.append(signal.num_channels)
            return TimeSignal(2 * signal.samples, signal.sample_rate)

        SeparationChain(self.chain_config(pre_stage=double)).run_chain(self.scene.mixture)
        self.assertListEqual(calls, [3])

    def test_stage_errors_name_the_stage(self):
        report = dict()
        with self.assertRaises(StageError) as context:
            with stage('overiva', report):
                raise SingularMatrix("singular")
        self.assertEqual(context.exception.stage, 'overiva')
        self.assertIn('[overiva]', str(context.exception))

    def test_same_size_handoff_matches_beamformer(self):
        # at equal STFT sizes the least squares rows reproduce the MVDR beamformers
        config = StftConfig(256)
        spec = stft(self.scene.mixture, config)
        _, gamma, _ = run_cacgmm(spec, 3, iterations=3, seed=0)
        estimates, beamformers = beamform_from_masks(spec, gamma)
        rows, empty = ls_demixing_rows(spec, estimates)
        valid = ~empty
        expected = np.conj(beamformers.w)[valid]
        self.assertLess(np.linalg.norm(rows[valid] - expected) / np.linalg.norm(expected), 1e-6)
