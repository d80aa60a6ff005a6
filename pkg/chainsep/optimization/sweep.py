"""STFT size sweep over a directory of simulated scenes."""
import glob
import json
import os

import dask
import numpy as np
import pandas as pd
from dask.distributed import Client

from chainsep.base.audio_io import read_wav
from chainsep.base.chain import ChainConfig, SeparationChain
from chainsep.base.errors import IoFailure
from chainsep.base.signals import StftConfig, TimeSignal
from chainsep.helper.helper import print_sweep_table
from chainsep.optimization.config_grid import create_sweep_grid
from chainsep.processing.metrics import permutation_invariant_eval, Scorer
from chainsep.processing.results_handler import cdf_at
from chainsep.seplogger.logger import logger

COLUMNS = ['algorithm', 'stft_size', 'shift', 'mean_si_sdr', 'median_si_sdr', 'cdf_at_7db', 'mean_input_sdr',
           'scenes', 'failed', 'error']
DEFAULT_SMM_SIZE = 1024
CDF_THRESHOLD = 7.


def find_scenes(scenes_dir: str) -> list:
    """Scene directories below scenes_dir (or scenes_dir itself), sorted by name."""
    if os.path.isfile(os.path.join(scenes_dir, 'mixture.wav')):
        return [scenes_dir]
    scenes = sorted(os.path.dirname(p) for p in glob.glob(os.path.join(scenes_dir, '*', 'mixture.wav')))
    if not scenes:
        msg = "No scenes (mixture.wav) found in '{}'".format(scenes_dir)
        logger.error(msg)
        raise IoFailure(msg)
    return scenes


def load_scene(directory: str, ref_channel: int = 0):
    """Mixture and the reference-channel source images of a simulated scene."""
    mixture = read_wav(os.path.join(directory, 'mixture.wav'))
    images = sorted(glob.glob(os.path.join(directory, 'image_*.wav')),
                    key=lambda p: int(os.path.splitext(os.path.basename(p))[0].split('_')[-1]))
    if not images:
        msg = "Scene '{}' has no image_k.wav references".format(directory)
        logger.error(msg)
        raise IoFailure(msg)
    references = np.stack([read_wav(p).samples[:, ref_channel] for p in images], axis=1)
    return mixture, TimeSignal(references, mixture.sample_rate)


def cell_chain_config(cell: dict, options: dict) -> ChainConfig:
    stft_config = StftConfig(cell['stft_size'], cell['shift'])
    algorithm = cell['algorithm']
    iterations = options.get('iva_iterations')
    if iterations is None:
        iterations = 50 if algorithm == 'chain' else 100
    if algorithm == 'cacgmm':
        return ChainConfig(options.get('sources', 2), smm_stft=stft_config,
                           smm_iterations=options.get('iterations', 20),
                           seed=options.get('seed', 0))
    if algorithm == 'overiva':
        return ChainConfig(options.get('sources', 2), iva_stft=stft_config, iva_iterations=iterations,
                           iva_init='identity')
    # the chain keeps its SMM stage at the default size and sweeps the IVA size
    return ChainConfig(options.get('sources', 2), smm_stft=StftConfig(DEFAULT_SMM_SIZE), iva_stft=stft_config,
                       smm_iterations=options.get('iterations', 20), iva_iterations=iterations,
                       seed=options.get('seed', 0))


def run_cell(cell: dict, scenes: list, options: dict) -> dict:
    """Separate and score every scene with one grid cell; failures are counted, not raised."""
    logger.line()
    logger.clean_info("Sweep cell " + json.dumps(cell, sort_keys=True))
    metric = Scorer.metric_for_taps(options.get('filter_taps', 1))
    results, errors = list(), list()
    for directory in scenes:
        try:
            mixture, references = load_scene(directory)
            if cell['algorithm'] == 'observation':
                estimates = [mixture.channel(0)] * references.num_channels
            else:
                chain = SeparationChain(cell_chain_config(cell, options))
                estimates, _ = chain.separate(mixture, cell['algorithm'])
            results.append(permutation_invariant_eval(estimates, references, metric, options.get('filter_taps', 1),
                                                      mixture=mixture.channel(0), name=os.path.basename(directory)))
        except Exception as e:
            logger.warning("Sweep cell {} failed on {}: {}".format(cell, directory, e))
            errors.append("{}: {}".format(os.path.basename(directory), e))

    row = dict(cell)
    row['scenes'] = len(results)
    row['failed'] = len(errors)
    row['error'] = '; '.join(errors)
    if results:
        means = [r.mean_sdr for r in results]
        row['mean_si_sdr'] = float(np.mean(means))
        row['median_si_sdr'] = float(np.median(means))
        row['cdf_at_7db'] = cdf_at(results, CDF_THRESHOLD)
        row['mean_input_sdr'] = float(np.mean([r.input_sdr for r in results]))
    else:
        row['mean_si_sdr'] = row['median_si_sdr'] = row['cdf_at_7db'] = row['mean_input_sdr'] = np.nan
    return row


def run_sweep(scenes_dir: str, out_path: str, algorithms: list, stft_sizes: list, shift_fractions: list,
              options: dict = None, processes: int = 1) -> pd.DataFrame:
    """
    Run every grid cell on every scene and write one CSV row per cell, in grid order.

    Parameters:
        scenes_dir:
            Directory produced by the simulate command.

        out_path:
            CSV target.

        options:
            sources, iterations, iva_iterations, seed and filter_taps.

        processes:
            Cells run as dask tasks on a local client when > 1.

    """
    options = dict() if options is None else options
    cells = create_sweep_grid(algorithms, stft_sizes, shift_fractions)
    scenes = find_scenes(scenes_dir)
    logger.info("Sweeping {} cells over {} scenes".format(len(cells), len(scenes)))

    if processes > 1:
        client = Client(threads_per_worker=1, n_workers=processes, processes=False)
        try:
            jobs = [dask.delayed(run_cell)(cell, scenes, options) for cell in cells]
            rows = list(dask.compute(*jobs))
        finally:
            client.close()
    else:
        rows = [run_cell(cell, scenes, options) for cell in cells]

    table = pd.DataFrame(rows, columns=COLUMNS)
    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    table.to_csv(out_path, index=False)
    print_sweep_table(table[COLUMNS[:8]])
    return table
