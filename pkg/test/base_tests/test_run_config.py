import json
import os

from chainsep.base.errors import ConfigError
from chainsep.base.run_config import RunConfig, DEFAULTS
from chainsep.helper.base_test import ChainsepBaseTest


class RunConfigTests(ChainsepBaseTest):

    @classmethod
    def setUpClass(cls) -> None:
        cls.file = __file__
        super(RunConfigTests, cls).setUpClass()

    def write_config(self, values: dict, name='config.json') -> str:
        path = os.path.join(self.tmp_folder_path, name)
        with open(path, 'w') as f:
            json.dump(values, f)
        return path

    def test_defaults(self):
        config = RunConfig('separate')
        self.assertEqual(config['algorithm'], 'chain')
        self.assertEqual(config.stft_config('smm').window_size, 1024)
        self.assertEqual(config.stft_config('iva').window_size, 2048)
        self.assertEqual(config.stft_config('iva').shift, 512)
        self.assertEqual(config.iva_iterations(), 50)
        self.assertEqual(config.iva_iterations('overiva'), 100)
        self.assertEqual(config.init_mode(), 'smm')
        self.assertEqual(RunConfig('separate', {'algorithm': 'overiva'}).init_mode(), 'identity')

    def test_precedence(self):
        path = self.write_config({'seed': 5, 'sources': 3, 'iterations': 7})
        config = RunConfig.resolve('separate', {'sources': 2, 'iterations': None}, path,
                                   environ={'BSS_SEED': '11'})
        # flag beats file, file beats environment, unset flags do not count
        self.assertEqual(config['sources'], 2)
        self.assertEqual(config['seed'], 5)
        self.assertEqual(config['iterations'], 7)

    def test_environment_seed(self):
        config = RunConfig.resolve('simulate', {}, environ={'BSS_SEED': '11'})
        self.assertEqual(config['seed'], 11)
        self.assertEqual(RunConfig.resolve('simulate', {'seed': 3}, environ={'BSS_SEED': '11'})['seed'], 3)
        with self.assertRaises(ConfigError):
            RunConfig.resolve('simulate', {}, environ={'BSS_SEED': 'abc'})

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError):
            RunConfig.resolve('separate', {}, self.write_config({'stft': 512}, 'unknown.json'), environ={})
        with self.assertRaises(ConfigError):
            RunConfig('nothing')

    def test_invalid_values(self):
        with self.assertRaises(ConfigError):
            RunConfig('separate', {'algorithm': 'nmf'})
        with self.assertRaises(ConfigError):
            RunConfig('separate', {'sources': 0})
        with self.assertRaises(ConfigError):
            RunConfig('separate', {'smm_stft_size': 1000})
        with self.assertRaises(ConfigError):
            RunConfig('separate', {'init': 'oracle'})
        with self.assertRaises(ConfigError):
            RunConfig('separate', {'algorithm': 'overiva', 'init': 'smm'})
        with self.assertRaises(ConfigError):
            RunConfig('simulate', {'channels': 1})
        with self.assertRaises(ConfigError):
            RunConfig('sweep', {'algorithms': ['chain', 'ica']})

    def test_invalid_json(self):
        path = os.path.join(self.tmp_folder_path, 'broken.json')
        with open(path, 'w') as f:
            f.write('{"seed": ')
        with self.assertRaises(ConfigError):
            RunConfig.resolve('separate', {}, path, environ={})

    def test_json_round_trip(self):
        config = RunConfig('sweep', {'stft_sizes': [256, 512], 'processes': 2})
        path = os.path.join(self.tmp_folder_path, 'run.json')
        config.to_json(path)
        loaded = RunConfig.from_json(path)
        self.assertEqual(loaded.command, 'sweep')
        self.assertDictEqual(loaded.to_dict(), config.to_dict())
        self.assertEqual(set(config.to_dict()) - {'command'}, set(DEFAULTS['sweep']))
