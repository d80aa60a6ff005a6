import os
from typing import List, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from chainsep.base.run_config import write_json_file
from chainsep.helper.helper import print_eval_table, print_cdf_table
from chainsep.processing.metrics import EvalResult
from chainsep.seplogger.logger import logger

CDF_STEP = 0.5


def _mean_values(results: List[Union[EvalResult, float]]) -> np.ndarray:
    return np.array([r.mean_sdr if isinstance(r, EvalResult) else float(r) for r in results])


def sdr_cdf(results: List[Union[EvalResult, float]], step: float = CDF_STEP) -> pd.DataFrame:
    """
    Empirical CDF of per-mixture mean SDRs.

    The grid runs in 0.5 dB steps from one step below floor(min) up to ceil(max), so the table
    starts at 0 and ends at 1.

    Returns:
        DataFrame with columns threshold_db and fraction.

    """
    values = _mean_values(results)
    if values.size == 0:
        msg = "Cannot build an SDR distribution from no results."
        logger.error(msg)
        raise ValueError(msg)
    start = np.floor(np.min(values)) - step
    stop = np.ceil(np.max(values))
    thresholds = start + step * np.arange(int(round((stop - start) / step)) + 1)
    fractions = np.mean(values[None, :] <= thresholds[:, None], axis=1)
    return pd.DataFrame({'threshold_db': thresholds, 'fraction': fractions})


def cdf_at(results: List[Union[EvalResult, float]], threshold: float = 7.) -> float:
    """Fraction of mixtures whose mean SDR is at most threshold."""
    values = _mean_values(results)
    return float(np.mean(values <= threshold))


def plot_sdr_cdf(curves: dict, path: str, title: str = 'Cumulative distribution of the achieved SDR'):
    """
    Parameters:
        curves:
            Label -> sdr_cdf table (or list of results), one line each.

        path:
            Output file, the format follows its extension (svg by default).

    """
    plt.figure()
    for label, table in curves.items():
        if not isinstance(table, pd.DataFrame):
            table = sdr_cdf(table)
        plt.step(table['threshold_db'], table['fraction'], where='post', label=label)
    plt.xlabel('SDR / dB')
    plt.ylabel('fraction of mixtures')
    plt.ylim(0, 1.02)
    plt.grid(alpha=0.3)
    plt.legend()
    plt.title(title)
    plt.savefig(path)
    plt.close()
    logger.info("Wrote SDR distribution plot to {}".format(path))


def write_eval_report(results: List[EvalResult], path: str, cdf_threshold: float = 7.) -> dict:
    """Per-mixture results, corpus means and the CDF table as JSON."""
    table = sdr_cdf(results)
    inputs = [r.input_sdr for r in results if r.input_sdr is not None]
    report = {'results': [r.to_dict() for r in results],
              'mean_sdr': float(np.mean(_mean_values(results))),
              'median_sdr': float(np.median(_mean_values(results))),
              'mean_input_sdr': float(np.mean(inputs)) if inputs else None,
              'cdf_at_{:g}db'.format(cdf_threshold): cdf_at(results, cdf_threshold),
              'cdf': table.to_dict(orient='list')}
    write_json_file(report, path)
    return report


def summarize_results(results: List[EvalResult]):
    print_eval_table(results)
    print_cdf_table(sdr_cdf(results))


def write_cdf_csv(results: List[EvalResult], path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    sdr_cdf(results).to_csv(path, index=False)
