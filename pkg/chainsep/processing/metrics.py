"""
Separation quality metrics.

The method stub of all metrics is
function_name(estimate, reference, filter_taps) -> dB
"""
import itertools
from typing import Callable, Dict, List, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.signal import fftconvolve

from chainsep.base.errors import LengthMismatch, ZeroReference
from chainsep.base.signals import TimeSignal
from chainsep.seplogger.logger import logger

SDR_CAP = 300.
CAP_ABSOLUTE = 1e-30
CAP_RELATIVE = 1e-25
PROJECTION_LOADING = 1e-8
MAX_PERMUTATION_SOURCES = 8

Signal = Union[TimeSignal, np.ndarray]


def _as_vector(signal: Signal) -> np.ndarray:
    if isinstance(signal, TimeSignal):
        if signal.num_channels != 1:
            msg = "Metrics need mono signals, got {} channels".format(signal.num_channels)
            logger.error(msg)
            raise ValueError(msg)
        return signal.samples[:, 0]
    return np.asarray(signal, dtype=np.float64).ravel()


def _check_pair(estimate: Signal, reference: Signal) -> Tuple[np.ndarray, np.ndarray]:
    estimate, reference = _as_vector(estimate), _as_vector(reference)
    if estimate.shape[0] != reference.shape[0]:
        msg = "Estimate has {} samples, reference {}".format(estimate.shape[0], reference.shape[0])
        logger.error(msg)
        raise LengthMismatch(msg)
    if not np.any(reference):
        msg = "Reference signal is all zero."
        logger.error(msg)
        raise ZeroReference(msg)
    return estimate, reference


def _ratio_db(target: np.ndarray, residual: np.ndarray) -> float:
    target_energy = float(np.sum(target ** 2))
    residual_energy = float(np.sum(residual ** 2))
    if target_energy == 0:
        return -SDR_CAP
    if residual_energy < CAP_ABSOLUTE or residual_energy < CAP_RELATIVE * target_energy:
        return SDR_CAP
    return float(min(10 * np.log10(target_energy / residual_energy), SDR_CAP))


def si_sdr(estimate: Signal, reference: Signal, filter_taps: int = 1) -> float:
    """Scale-invariant SDR in dB; capped at +-300 dB."""
    estimate, reference = _check_pair(estimate, reference)
    alpha = np.dot(estimate, reference) / np.dot(reference, reference)
    target = alpha * reference
    return _ratio_db(target, estimate - target)


def delayed_gram(reference: np.ndarray, filter_taps: int) -> np.ndarray:
    """
    Gram matrix G[i, j] = sum_n ref[n - i] ref[n - j] of the reference and its delayed copies
    (zero filled, truncated to the signal length).
    """
    n, taps = reference.shape[0], filter_taps
    autocorrelation = fftconvolve(reference, reference[::-1])[n - 1:n - 1 + taps]
    if autocorrelation.shape[0] < taps:
        autocorrelation = np.concatenate([autocorrelation, np.zeros(taps - autocorrelation.shape[0])])

    # shifting both delays by one drops the product of the two last samples
    tail = np.zeros(2 * taps)
    reversed_ref = reference[::-1][:2 * taps]
    tail[:reversed_ref.shape[0]] = reversed_ref
    lags = np.arange(taps)
    products = tail[None, :taps] * tail[lags[:, None] + np.arange(taps)[None, :]]
    corrections = np.concatenate([np.zeros((taps, 1)), np.cumsum(products, axis=1)], axis=1)

    gram = np.empty((taps, taps))
    for lag in range(taps):
        rows = np.arange(taps - lag)
        values = autocorrelation[lag] - corrections[lag, rows]
        gram[rows, rows + lag] = values
        gram[rows + lag, rows] = values
    return gram


def filtered_sdr(estimate: Signal, reference: Signal, filter_taps: int = 512) -> float:
    """
    SDR allowing a filter_taps long distortion filter on the reference; filter_taps = 1 is si_sdr.
    """
    if filter_taps < 1:
        msg = "filter_taps must be >= 1, got {}".format(filter_taps)
        logger.error(msg)
        raise ValueError(msg)
    estimate, reference = _check_pair(estimate, reference)
    n = estimate.shape[0]
    taps = int(filter_taps)
    gram = delayed_gram(reference, taps)
    cross = fftconvolve(estimate, reference[::-1])[n - 1:n - 1 + taps]
    if cross.shape[0] < taps:
        cross = np.concatenate([cross, np.zeros(taps - cross.shape[0])])
    try:
        coefficients = cho_solve(cho_factor(gram), cross)
    except np.linalg.LinAlgError:
        logger.warning("Ill-conditioned SDR projection, solving loaded normal equations.")
        loaded = gram + PROJECTION_LOADING * max(np.trace(gram) / taps, 1e-300) * np.eye(taps)
        coefficients = np.linalg.solve(loaded, cross)
    target = np.convolve(reference, coefficients)[:n]
    return _ratio_db(target, estimate - target)


class Scorer(object):
    """Maps metric names to metric functions."""

    ELEMENT_DICTIONARY: Dict[str, Tuple[str, str, str]] = {
        'si_sdr': ('chainsep.processing.metrics', 'si_sdr', 'score'),
        'filtered_sdr': ('chainsep.processing.metrics', 'filtered_sdr', 'score'),
    }

    @classmethod
    def create(cls, metric: str) -> Callable:
        if metric not in Scorer.ELEMENT_DICTIONARY:
            msg = 'Metric not supported right now: ' + str(metric)
            logger.error(msg)
            raise NameError(msg)
        home, name, _ = Scorer.ELEMENT_DICTIONARY[metric]
        imported_module = __import__(home, globals(), locals(), name, 0)
        return getattr(imported_module, name)

    @staticmethod
    def metric_for_taps(filter_taps: int) -> str:
        return 'si_sdr' if filter_taps <= 1 else 'filtered_sdr'

    @staticmethod
    def calculate_metrics(estimate: Signal, reference: Signal, metrics: List[str], filter_taps: int = 512) -> dict:
        return {metric: Scorer.create(metric)(estimate, reference, filter_taps) for metric in metrics}


class EvalResult:
    """
    Parameters:
        per_source:
            SDR of every reference under the chosen assignment.

        permutation:
            permutation[k] is the estimate index assigned to reference k.

        input_sdr:
            Mean SDR of the unprocessed reference-channel mixture, if it was given.

    """
    def __init__(self, per_source: List[float], permutation: List[int], input_sdr: float = None,
                 metric: str = 'si_sdr', name: str = None):
        self.per_source = [float(v) for v in per_source]
        self.permutation = [int(p) for p in permutation]
        self.input_sdr = None if input_sdr is None else float(input_sdr)
        self.metric = metric
        self.name = name

    @property
    def mean_sdr(self) -> float:
        return float(np.mean(self.per_source))

    @property
    def improvement(self):
        return None if self.input_sdr is None else self.mean_sdr - self.input_sdr

    def to_dict(self) -> dict:
        return {'name': self.name, 'metric': self.metric, 'per_source': self.per_source,
                'permutation': self.permutation, 'mean_sdr': self.mean_sdr, 'input_sdr': self.input_sdr,
                'improvement': self.improvement}


def _as_list(signals) -> List[np.ndarray]:
    if isinstance(signals, TimeSignal):
        return [signals.samples[:, k] for k in range(signals.num_channels)]
    return [_as_vector(s) for s in signals]


def permutation_invariant_eval(estimates, references, metric: str = 'si_sdr', filter_taps: int = 1,
                               mixture: Signal = None, name: str = None) -> EvalResult:
    """
    Score all K! assignments of estimates to references and keep the one with the best mean.

    Parameters:
        estimates, references:
            K mono signals each (lists, or multichannel TimeSignals with one source per channel).

        metric:
            Name in Scorer.ELEMENT_DICTIONARY.

        mixture:
            Optional reference-channel mixture; scored against every reference as the input SDR.

    """
    estimates, references = _as_list(estimates), _as_list(references)
    if len(estimates) != len(references):
        msg = "Got {} estimates for {} references".format(len(estimates), len(references))
        logger.error(msg)
        raise LengthMismatch(msg)
    k = len(references)
    if k > MAX_PERMUTATION_SOURCES:
        msg = "Exhaustive permutation search is limited to {} sources".format(MAX_PERMUTATION_SOURCES)
        logger.error(msg)
        raise ValueError(msg)
    scorer = Scorer.create(metric)
    # scores[reference, estimate]
    scores = np.array([[scorer(estimates[j], references[i], filter_taps) for j in range(k)] for i in range(k)])
    best, best_value = None, -np.inf
    for candidate in itertools.permutations(range(k)):
        value = np.mean(scores[np.arange(k), list(candidate)])
        if value > best_value:
            best, best_value = candidate, value
    per_source = scores[np.arange(k), list(best)]

    input_sdr = None
    if mixture is not None:
        input_sdr = float(np.mean([scorer(mixture, reference, filter_taps) for reference in references]))
    return EvalResult(per_source, best, input_sdr, metric, name)
