"""Command line interface: simulate, separate, eval and sweep.

Exit codes: 0 success, 2 configuration or input problem, 3 numerical failure.
"""
import argparse
import glob
import os
import sys
from contextlib import nullcontext

import numpy as np
from threadpoolctl import threadpool_limits

from chainsep import __version__
from chainsep.base.audio_io import read_wav, write_wav
from chainsep.base.chain import ChainConfig, SeparationChain
from chainsep.base.errors import ChainsepError, ConfigError, StageError
from chainsep.base.run_config import RunConfig, write_json_file, ALGORITHMS, INIT_MODES, MIXING_MODELS, \
    SOURCE_MODELS, SWEEP_ALGORITHMS, WAV_FORMATS
from chainsep.helper.helper import print_stage_report, print_metrics
from chainsep.optimization.sweep import run_sweep, load_scene, find_scenes
from chainsep.processing.metrics import permutation_invariant_eval, Scorer
from chainsep.processing.results_handler import write_eval_report, plot_sdr_cdf, summarize_results, cdf_at
from chainsep.seplogger.logger import logger, set_verbosity
from chainsep.simulation.scene import SceneParams, simulate_scenes

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _flag(parser, name, **kwargs):
    kwargs.setdefault('default', None)
    parser.add_argument(name, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='chainsep', description='Multichannel blind source separation: cACGMM, '
                                                                  'OverIVA and their chain.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--verbosity', type=int, default=0, choices=[-1, 0, 1, 2])
    subparsers = parser.add_subparsers(dest='command')

    simulate = subparsers.add_parser('simulate', help='generate synthetic mixtures with ground truth')
    _flag(simulate, '--config')
    _flag(simulate, '--out')
    _flag(simulate, '--scenes', type=int)
    _flag(simulate, '--seed', type=int)
    _flag(simulate, '--channels', type=int)
    _flag(simulate, '--sources', type=int)
    _flag(simulate, '--duration', type=float)
    _flag(simulate, '--sample-rate', type=int)
    _flag(simulate, '--mixing', choices=MIXING_MODELS)
    _flag(simulate, '--rir-length', type=int)
    _flag(simulate, '--decay-rate', type=float)
    _flag(simulate, '--drr-db', type=float)
    _flag(simulate, '--snr-db', type=float, help="image-to-noise ratio; 'inf' disables noise")
    _flag(simulate, '--sir-db', type=float)
    _flag(simulate, '--source-model', choices=SOURCE_MODELS)
    _flag(simulate, '--processes', type=int)

    separate = subparsers.add_parser('separate', help='separate a multichannel WAV file')
    _flag(separate, '--config')
    _flag(separate, '--input')
    _flag(separate, '--out')
    _flag(separate, '--algorithm', choices=ALGORITHMS)
    _flag(separate, '--sources', type=int)
    _flag(separate, '--classes', type=int, help='cACGMM classes; sources + 1 keeps a noise class')
    _flag(separate, '--no-noise-class', dest='noise_class', action='store_const', const=False)
    _flag(separate, '--smm-stft-size', type=int)
    _flag(separate, '--smm-shift', type=int)
    _flag(separate, '--iva-stft-size', type=int)
    _flag(separate, '--iva-shift', type=int)
    _flag(separate, '--iterations', type=int)
    _flag(separate, '--iva-iterations', type=int)
    _flag(separate, '--seed', type=int)
    _flag(separate, '--init', choices=INIT_MODES)
    _flag(separate, '--ref-channel', type=int)
    _flag(separate, '--no-permutation-solver', dest='permutation_solver', action='store_const', const=False)
    _flag(separate, '--mask-multiply', action='store_const', const=True)
    _flag(separate, '--dump-intermediate')
    _flag(separate, '--oracle-dir')
    _flag(separate, '--threads', type=int)
    _flag(separate, '--wav-format', choices=WAV_FORMATS)

    evaluate = subparsers.add_parser('eval', help='score estimates against references')
    _flag(evaluate, '--config')
    _flag(evaluate, '--est')
    _flag(evaluate, '--ref')
    _flag(evaluate, '--filter-taps', type=int)
    _flag(evaluate, '--json')
    _flag(evaluate, '--plot')

    sweep = subparsers.add_parser('sweep', help='compare algorithms over STFT sizes')
    _flag(sweep, '--config')
    _flag(sweep, '--scenes-dir')
    _flag(sweep, '--out')
    _flag(sweep, '--algorithms', nargs='+', choices=SWEEP_ALGORITHMS)
    _flag(sweep, '--stft-sizes', nargs='+', type=int)
    _flag(sweep, '--shift-fractions', nargs='+', type=float)
    _flag(sweep, '--sources', type=int)
    _flag(sweep, '--iterations', type=int)
    _flag(sweep, '--iva-iterations', type=int)
    _flag(sweep, '--seed', type=int)
    _flag(sweep, '--filter-taps', type=int)
    _flag(sweep, '--processes', type=int)
    _flag(sweep, '--threads', type=int)
    return parser


def _resolve(args) -> RunConfig:
    flags = {key: value for key, value in vars(args).items() if key not in ('command', 'config', 'verbosity')}
    classes = flags.pop('classes', None)
    config = RunConfig.resolve(args.command, flags, args.config)
    if classes is not None:
        # classes is only a shorthand for the noise class switch
        if classes not in (config['sources'], config['sources'] + 1):
            msg = "--classes must be sources ({0}) or sources + 1 ({1})".format(config['sources'],
                                                                             config['sources'] + 1)
            logger.error(msg)
            raise ConfigError(msg)
        config.values['noise_class'] = classes == config['sources'] + 1
    return config


def _require(config: RunConfig, *keys):
    missing = ['--' + key.replace('_', '-') for key in keys if config[key] is None]
    if missing:
        msg = "Missing required option(s): {}".format(', '.join(missing))
        logger.error(msg)
        raise ConfigError(msg)


def _threads(config: RunConfig):
    if config.get('threads'):
        return threadpool_limits(limits=int(config['threads']))
    return nullcontext()


def cmd_simulate(config: RunConfig) -> int:
    _require(config, 'out')
    params = SceneParams.from_run_config(config)
    os.makedirs(config['out'], exist_ok=True)
    config.to_json(os.path.join(config['out'], 'run.json'))
    directories = simulate_scenes(params, config['out'], config['scenes'], config['seed'], config['processes'])
    logger.system_log("Simulated {} scene(s) in {}".format(len(directories), config['out']))
    return EXIT_OK


def cmd_separate(config: RunConfig) -> int:
    _require(config, 'input', 'out')
    signal = read_wav(config['input'])
    if signal.num_channels < 2:
        msg = "Separation requires at least two channels; '{}' has {}".format(config['input'], signal.num_channels)
        logger.error(msg)
        raise ConfigError(msg)
    out = config['out']
    os.makedirs(out, exist_ok=True)
    config.to_json(os.path.join(out, 'run.json'))

    oracle_sources = None
    if config.init_mode() == 'oracle':
        _, oracle_sources = load_scene(config['oracle_dir'])
    chain = SeparationChain(ChainConfig.from_run_config(config))
    logger.stars()
    logger.system_log("Separating {} with {} ({} sources)".format(config['input'], config['algorithm'],
                                                                   config['sources']))
    logger.stars()
    with _threads(config):
        sources, report = chain.separate(signal, config['algorithm'], oracle_sources)
    for k, source in enumerate(sources):
        write_wav(os.path.join(out, 'est_{}.wav'.format(k)), source, config['wav_format'])
    write_json_file({'config': config.to_dict(), 'stages': report}, os.path.join(out, 'report.json'))
    print_stage_report(report)
    return EXIT_OK


def _estimate_files(directory: str) -> list:
    def index(path):
        stem = os.path.splitext(os.path.basename(path))[0]
        suffix = stem.split('_')[-1]
        return (int(suffix), stem) if suffix.isdigit() else (sys.maxsize, stem)
    files = glob.glob(os.path.join(directory, 'est_*.wav')) or glob.glob(os.path.join(directory, '*.wav'))
    return sorted(files, key=index)


def _evaluate_pair(est_dir: str, scene_dir: str, metric: str, filter_taps: int):
    mixture, references = load_scene(scene_dir)
    files = _estimate_files(est_dir)
    if not files:
        msg = "No estimate WAV files in '{}'".format(est_dir)
        logger.error(msg)
        raise ConfigError(msg)
    estimates = [read_wav(path) for path in files]
    return permutation_invariant_eval(estimates, references, metric, filter_taps, mixture=mixture.channel(0),
                                      name=os.path.basename(os.path.normpath(scene_dir)))


def cmd_eval(config: RunConfig) -> int:
    _require(config, 'est', 'ref')
    filter_taps = config['filter_taps']
    metric = Scorer.metric_for_taps(filter_taps)
    scenes = find_scenes(config['ref'])
    if len(scenes) == 1 and os.path.normpath(scenes[0]) == os.path.normpath(config['ref']):
        pairs = [(config['est'], scenes[0])]
    else:
        pairs = [(os.path.join(config['est'], os.path.basename(scene)), scene) for scene in scenes]
    results = [_evaluate_pair(est_dir, scene_dir, metric, filter_taps) for est_dir, scene_dir in pairs]
    summarize_results(results)
    if config['json'] is not None:
        write_eval_report(results, config['json'])
    if config['plot'] is not None:
        plot_sdr_cdf({metric: results}, config['plot'])
    means = [r.mean_sdr for r in results]
    print_metrics(metric, {'mixtures': len(results), 'mean': float(np.mean(means)),
                           'median': float(np.median(means)), 'cdf_at_7db': cdf_at(results, 7.)})
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    _require(config, 'scenes_dir', 'out')
    os.makedirs(config['out'], exist_ok=True)
    config.to_json(os.path.join(config['out'], 'run.json'))
    options = {key: config[key] for key in ['sources', 'iterations', 'iva_iterations', 'seed', 'filter_taps']}
    with _threads(config):
        run_sweep(config['scenes_dir'], os.path.join(config['out'], 'sweep.csv'), config['algorithms'],
                  config['stft_sizes'], config['shift_fractions'], options, config['processes'])
    return EXIT_OK


COMMANDS = {'simulate': cmd_simulate, 'separate': cmd_separate, 'eval': cmd_eval, 'sweep': cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    set_verbosity(args.verbosity)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        config = _resolve(args)
        return COMMANDS[args.command](config)
    except (StageError, np.linalg.LinAlgError) as e:
        logger.error("Numerical failure: {}".format(e))
        return EXIT_NUMERICAL
    except (ChainsepError, ValueError, OSError) as e:
        logger.error("{}: {}".format(type(e).__name__, e))
        return EXIT_CONFIG
