import json
import os

import numpy as np
import pandas as pd

from chainsep.base.audio_io import read_wav, write_wav
from chainsep.cli import main, EXIT_OK, EXIT_CONFIG
from chainsep.helper.base_test import ChainsepBaseTest

FAST_SEPARATION = ['--smm-stft-size', '256', '--iva-stft-size', '512', '--iterations', '3', '--iva-iterations', '3']


class CommandLineTests(ChainsepBaseTest):

    @classmethod
    def setUpClass(cls) -> None:
        cls.file = __file__
        super(CommandLineTests, cls).setUpClass()
        cls.scenes_dir = os.path.join(cls.tmp_folder_path, 'scenes')
        code = main(['--verbosity', '-1', 'simulate', '--out', cls.scenes_dir, '--scenes', '2', '--seed', '3',
                     '--channels', '3', '--duration', '1.5', '--mixing', 'delays', '--snr-db', '30'])
        assert code == EXIT_OK
        cls.scene = os.path.join(cls.scenes_dir, 'scene_000')

    def path(self, *names):
        return os.path.join(self.tmp_folder_path, *names)

    def separate(self, out, *extra):
        return main(['--verbosity', '-1', 'separate', '--input', os.path.join(self.scene, 'mixture.wav'),
                     '--out', out] + FAST_SEPARATION + list(extra))

    def test_simulate_outputs(self):
        self.assertTrue(os.path.isfile(os.path.join(self.scenes_dir, 'run.json')))
        for name in ['mixture.wav', 'image_0.wav', 'image_1.wav', 'source_0.wav', 'noise.wav', 'scene.json']:
            self.assertTrue(os.path.isfile(os.path.join(self.scene, name)), name)

    def test_separate_contract(self):
        out = self.path('separated')
        self.assertEqual(self.separate(out), EXIT_OK)
        self.assertSetEqual(set(os.listdir(out)), {'est_0.wav', 'est_1.wav', 'run.json', 'report.json'})
        mixture = read_wav(os.path.join(self.scene, 'mixture.wav'))
        for k in range(2):
            self.assertEqual(read_wav(os.path.join(out, 'est_{}.wav'.format(k))).num_samples, mixture.num_samples)
        with open(os.path.join(out, 'run.json')) as f:
            run = json.load(f)
        self.assertEqual(run['command'], 'separate')
        self.assertEqual(run['smm_stft_size'], 256)
        with open(os.path.join(out, 'report.json')) as f:
            report = json.load(f)
        self.assertIn('overiva', report['stages'])

    def test_separate_deterministic(self):
        first, second = self.path('first'), self.path('second')
        self.assertEqual(self.separate(first, '--seed', '4'), EXIT_OK)
        self.assertEqual(self.separate(second, '--seed', '4'), EXIT_OK)
        for k in range(2):
            a = read_wav(os.path.join(first, 'est_{}.wav'.format(k))).samples
            b = read_wav(os.path.join(second, 'est_{}.wav'.format(k))).samples
            np.testing.assert_array_equal(a, b)

    def test_rerun_from_run_json(self):
        out = self.path('original')
        self.assertEqual(self.separate(out, '--algorithm', 'cacgmm'), EXIT_OK)
        rerun = self.path('rerun')
        code = main(['--verbosity', '-1', 'separate', '--config', os.path.join(out, 'run.json'), '--out', rerun])
        self.assertEqual(code, EXIT_OK)
        np.testing.assert_array_equal(read_wav(os.path.join(out, 'est_0.wav')).samples,
                                      read_wav(os.path.join(rerun, 'est_0.wav')).samples)

    def test_mono_input(self):
        mono = self.path('mono.wav')
        write_wav(mono, read_wav(os.path.join(self.scene, 'mixture.wav')).channel(0))
        code = main(['--verbosity', '-1', 'separate', '--input', mono, '--out', self.path('mono_out')])
        self.assertEqual(code, EXIT_CONFIG)

    def test_config_errors(self):
        self.assertEqual(main(['--verbosity', '-1', 'separate', '--out', self.path('x')]), EXIT_CONFIG)
        self.assertEqual(self.separate(self.path('bad_classes'), '--classes', '5'), EXIT_CONFIG)
        self.assertEqual(main(['separate', '--algorithm', 'nmf']), EXIT_CONFIG)
        self.assertEqual(main([]), EXIT_CONFIG)

    def test_oracle_images_score_capped(self):
        out = self.path('oracle_eval.json')
        est_dir = self.path('oracle_estimates')
        os.makedirs(est_dir, exist_ok=True)
        for k in range(2):
            image = read_wav(os.path.join(self.scene, 'image_{}.wav'.format(k)))
            write_wav(os.path.join(est_dir, 'est_{}.wav'.format(k)), image.channel(0))
        code = main(['--verbosity', '-1', 'eval', '--est', est_dir, '--ref', self.scene, '--json', out])
        self.assertEqual(code, EXIT_OK)
        with open(out) as f:
            report = json.load(f)
        self.assertEqual(report['mean_sdr'], 300.)

    def test_eval_count_mismatch(self):
        est_dir = self.path('three_estimates')
        os.makedirs(est_dir, exist_ok=True)
        mixture = read_wav(os.path.join(self.scene, 'mixture.wav'))
        for k in range(3):
            write_wav(os.path.join(est_dir, 'est_{}.wav'.format(k)), mixture.channel(k))
        code = main(['--verbosity', '-1', 'eval', '--est', est_dir, '--ref', self.scene])
        self.assertEqual(code, EXIT_CONFIG)

    def test_end_to_end(self):
        separated = self.path('corpus_estimates')
        for scene in ['scene_000', 'scene_001']:
            code = main(['--verbosity', '-1', 'separate', '--input',
                         os.path.join(self.scenes_dir, scene, 'mixture.wav'),
                         '--out', os.path.join(separated, scene)] + FAST_SEPARATION)
            self.assertEqual(code, EXIT_OK)
        report_path, plot_path = self.path('eval.json'), self.path('cdf.svg')
        code = main(['--verbosity', '-1', 'eval', '--est', separated, '--ref', self.scenes_dir, '--json', report_path,
                     '--plot', plot_path])
        self.assertEqual(code, EXIT_OK)
        with open(report_path) as f:
            report = json.load(f)
        self.assertEqual(len(report['results']), 2)
        self.assertEqual(report['cdf']['fraction'][-1], 1.)
        self.assertTrue(os.path.isfile(plot_path))

    def test_separate_on_defaults(self):
        out = self.path('defaults')
        code = main(['--verbosity', '-1', 'separate', '--input', os.path.join(self.scene, 'mixture.wav'),
                     '--out', out])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.isfile(os.path.join(out, 'est_1.wav')))

    def test_sweep(self):
        out = self.path('sweep')
        code = main(['--verbosity', '-1', 'sweep', '--scenes-dir', self.scenes_dir, '--out', out,
                     '--algorithms', 'observation', 'overiva', '--stft-sizes', '256', '--iva-iterations', '2'])
        self.assertEqual(code, EXIT_OK)
        table = pd.read_csv(os.path.join(out, 'sweep.csv'))
        self.assertEqual(table.shape[0], 2)
        self.assertListEqual(list(table['algorithm']), ['observation', 'overiva'])
        self.assertTrue(os.path.isfile(os.path.join(out, 'run.json')))

    def test_oracle_initialization(self):
        out = self.path('oracle_init')
        code = self.separate(out, '--algorithm', 'overiva', '--init', 'oracle', '--oracle-dir', self.scene)
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(out, 'report.json')) as f:
            self.assertEqual(json.load(f)['config']['init'], 'oracle')
