"""Run configuration shared by all subcommands.

Values are resolved per option: command line flag > config file > BSS_SEED
environment variable (seed only) > DEFAULTS. The resolved dictionary is flat,
keyed like the command line flags (dashes replaced by underscores) and is
written next to the outputs as run.json.
"""
import json
import os

from chainsep.base.errors import ConfigError, IoFailure
from chainsep.base.signals import StftConfig
from chainsep.seplogger.logger import logger

SEED_ENVIRONMENT_VARIABLE = 'BSS_SEED'

ALGORITHMS = ['cacgmm', 'overiva', 'chain']
SWEEP_ALGORITHMS = ALGORITHMS + ['observation']
INIT_MODES = ['identity', 'pca', 'smm', 'oracle']
MIXING_MODELS = ['instantaneous', 'delays', 'exp_decay_rir']
SOURCE_MODELS = ['am_noise', 'am_tones']
WAV_FORMATS = ['float32', 'pcm16']

DEFAULTS = {
    'separate': {'input': None, 'out': None, 'algorithm': 'chain', 'sources': 2, 'noise_class': True,
                 'smm_stft_size': 1024, 'smm_shift': None, 'iva_stft_size': 2048, 'iva_shift': None,
                 'iterations': 20, 'iva_iterations': None, 'seed': 0, 'init': None, 'ref_channel': None,
                 'permutation_solver': True, 'mask_multiply': False, 'dump_intermediate': None,
                 'oracle_dir': None, 'threads': None, 'wav_format': 'float32'},
    'simulate': {'out': None, 'scenes': 1, 'seed': 0, 'channels': 6, 'sources': 2, 'duration': 4.0,
                 'sample_rate': 8000, 'mixing': 'exp_decay_rir', 'rir_length': 2048, 'decay_rate': 0.08,
                 'drr_db': 0.0, 'snr_db': 25.0, 'sir_db': 0.0, 'source_model': 'am_noise', 'processes': 1},
    'eval': {'est': None, 'ref': None, 'filter_taps': 1, 'json': None, 'plot': None},
    'sweep': {'scenes_dir': None, 'out': None, 'algorithms': ['cacgmm', 'overiva', 'chain'],
              'stft_sizes': [512, 1024, 2048], 'shift_fractions': [0.25], 'sources': 2, 'iterations': 20,
              'iva_iterations': None, 'seed': 0, 'filter_taps': 1, 'processes': 1, 'threads': None},
}


class RunConfig:
    """
    Fully resolved options of one subcommand.

    Parameters:
        command:
            One of the keys of DEFAULTS.

        values:
            Option values; missing keys take the defaults.

    """
    def __init__(self, command: str, values: dict = None):
        if command not in DEFAULTS:
            msg = "Unknown command '{}', choose from {}".format(command, list(DEFAULTS))
            logger.error(msg)
            raise ConfigError(msg)
        self.command = command
        self.values = dict(DEFAULTS[command])
        if values:
            self._update(values, source='arguments')
        self.validate()

    def _update(self, values: dict, source: str):
        unknown = [key for key in values if key not in self.values and key != 'command']
        if unknown:
            msg = "Unknown option(s) {} in {} for command '{}'".format(unknown, source, self.command)
            logger.error(msg)
            raise ConfigError(msg)
        for key, value in values.items():
            if key != 'command':
                self.values[key] = value

    @classmethod
    def resolve(cls, command: str, flags: dict, config_file: str = None, environ: dict = None) -> 'RunConfig':
        """
        Merge defaults, BSS_SEED, a JSON config file and explicitly given flags, in rising priority.
        """
        if environ is None:
            environ = os.environ
        config = cls(command)
        if 'seed' in config.values and environ.get(SEED_ENVIRONMENT_VARIABLE) not in (None, ''):
            try:
                config.values['seed'] = int(environ[SEED_ENVIRONMENT_VARIABLE])
            except ValueError:
                msg = "{} must be an integer, got '{}'".format(SEED_ENVIRONMENT_VARIABLE,
                                                               environ[SEED_ENVIRONMENT_VARIABLE])
                logger.error(msg)
                raise ConfigError(msg)
        if config_file is not None:
            config._update(read_json_file(config_file), source=config_file)
        config._update({key: value for key, value in flags.items() if value is not None}, source='flags')
        config.validate()
        return config

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_dict(self) -> dict:
        values = dict(self.values)
        values['command'] = self.command
        return values

    def to_json(self, path: str):
        write_json_file(self.to_dict(), path)

    @classmethod
    def from_json(cls, path: str) -> 'RunConfig':
        values = read_json_file(path)
        if 'command' not in values:
            msg = "'{}' does not name the command it configures".format(path)
            logger.error(msg)
            raise ConfigError(msg)
        return cls(values['command'], values)

    def _choice(self, key, choices):
        value = self.values.get(key)
        if value is not None and value not in choices:
            msg = "Invalid {} '{}', choose from {}".format(key, value, choices)
            logger.error(msg)
            raise ConfigError(msg)

    def _positive(self, key):
        value = self.values.get(key)
        if value is not None and (not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0):
            msg = "Option {} must be positive, got {}".format(key, value)
            logger.error(msg)
            raise ConfigError(msg)

    def validate(self):
        for key in ['sources', 'iterations', 'iva_iterations', 'scenes', 'channels', 'duration',
                    'sample_rate', 'rir_length', 'decay_rate', 'filter_taps', 'processes', 'threads']:
            self._positive(key)
        if self.command == 'separate':
            self._choice('algorithm', ALGORITHMS)
            self._choice('init', INIT_MODES)
            self._choice('wav_format', WAV_FORMATS)
            self.stft_config('smm')
            self.stft_config('iva')
            if self.values['init'] == 'oracle' and self.values['oracle_dir'] is None:
                msg = "init 'oracle' needs oracle_dir pointing at a simulated scene"
                logger.error(msg)
                raise ConfigError(msg)
            if self.values['init'] == 'smm' and self.values['algorithm'] != 'chain':
                msg = "init 'smm' is only available for the chain algorithm"
                logger.error(msg)
                raise ConfigError(msg)
        elif self.command == 'simulate':
            self._choice('mixing', MIXING_MODELS)
            self._choice('source_model', SOURCE_MODELS)
            if self.values['channels'] < 2:
                msg = "Scenes need at least two channels, got {}".format(self.values['channels'])
                logger.error(msg)
                raise ConfigError(msg)
        elif self.command == 'sweep':
            for algorithm in self.values['algorithms']:
                if algorithm not in SWEEP_ALGORITHMS:
                    msg = "Unknown sweep algorithm '{}', choose from {}".format(algorithm, SWEEP_ALGORITHMS)
                    logger.error(msg)
                    raise ConfigError(msg)
            for size in self.values['stft_sizes']:
                for fraction in self.values['shift_fractions']:
                    StftConfig(size, int(round(size * fraction)))

    def stft_config(self, stage: str) -> StftConfig:
        """StftConfig of the 'smm' or 'iva' stage."""
        return StftConfig(self.values['{}_stft_size'.format(stage)], self.values['{}_shift'.format(stage)])

    def iva_iterations(self, algorithm: str = None) -> int:
        if self.values.get('iva_iterations') is not None:
            return int(self.values['iva_iterations'])
        algorithm = algorithm or self.values.get('algorithm')
        # chained runs start near a solution
        return 50 if algorithm == 'chain' else 100

    def init_mode(self) -> str:
        if self.values.get('init') is not None:
            return self.values['init']
        return 'smm' if self.values.get('algorithm') == 'chain' else 'identity'


def write_json_file(value: dict, path: str):
    try:
        with open(path, 'w') as outfile:
            json.dump(value, outfile, indent=4)
    except OSError as e:
        msg = "Cannot write '{}': {}".format(path, e)
        logger.error(msg)
        raise IoFailure(msg) from e


def read_json_file(path: str) -> dict:
    try:
        with open(path, 'r') as infile:
            value = json.load(infile)
    except OSError as e:
        msg = "Cannot read '{}': {}".format(path, e)
        logger.error(msg)
        raise ConfigError(msg) from e
    except json.JSONDecodeError as e:
        msg = "'{}' is not valid JSON: {}".format(path, e)
        logger.error(msg)
        raise ConfigError(msg) from e
    if not isinstance(value, dict):
        msg = "'{}' must hold a flat JSON object".format(path)
        logger.error(msg)
        raise ConfigError(msg)
    return value
