"""Mask-based MVDR beamforming in the Souden formulation.

Beamformer coefficients w are stored as [F, K, M] and applied as
d_hat_{f,t,k} = w_{f,k}^H y_{f,t}.
"""
import numpy as np

from chainsep.base.signals import MultichannelSpectrogram, SourceEstimates
from chainsep.helper.hermitian_linalg import hermitize, load_diagonal, batched_inv_hermitian, DEFAULT_LOADING
from chainsep.seplogger.logger import logger

MASK_FLOOR = 1e-10
TRACE_THRESHOLD = 1e-12
TIE_TOLERANCE = 1e-9


class BeamformerSet:
    """
    Beamformer coefficients of all sources.

    Parameters:
        w:
            Coefficients [F, K, M].

        reference_channel:
            Selected (or forced) reference microphone per source.

        degenerate:
            Boolean [F, K], True where the MVDR trace vanished and w was set to zero.

    """
    def __init__(self, w: np.ndarray, reference_channel: list, degenerate: np.ndarray = None):
        self.w = w
        self.reference_channel = [int(r) for r in reference_channel]
        self.degenerate = np.zeros(w.shape[:2], dtype=bool) if degenerate is None else degenerate

    @property
    def num_degenerate(self) -> int:
        return int(np.sum(self.degenerate))


def estimate_scm(spec: MultichannelSpectrogram, mask: np.ndarray, return_degenerate: bool = False):
    """
    Mask-weighted spatial covariance Phi_f = sum_t m y y^H / max(sum_t m, 1e-10), loaded.

    Parameters:
        spec:
            Observations [F, T, M].

        mask:
            Weights in [0, 1] of shape [F, T].

        return_degenerate:
            Also return a boolean [F] marking frequencies without any mask weight.

    """
    mask = np.asarray(mask, dtype=float)
    if mask.shape != spec.shape[:2]:
        msg = "Mask shape {} does not match spectrogram {}".format(mask.shape, spec.shape[:2])
        logger.error(msg)
        raise ValueError(msg)
    y = spec.data
    weight = np.sum(mask, axis=1)
    scm = np.einsum('ft,ftm,ftn->fmn', mask, y, np.conj(y), optimize=True) / \
        np.maximum(weight, MASK_FLOOR)[:, None, None]
    scm = load_diagonal(hermitize(scm), DEFAULT_LOADING)
    if return_degenerate:
        return scm, weight < MASK_FLOOR
    return scm


def _mvdr_batch(phi_target: np.ndarray, phi_distortion: np.ndarray, ref: int):
    numerator = batched_inv_hermitian(phi_distortion) @ phi_target
    trace = np.trace(numerator, axis1=-2, axis2=-1)
    degenerate = np.abs(trace) < TRACE_THRESHOLD
    safe_trace = np.where(degenerate, 1., trace)
    w = numerator[..., :, ref] / safe_trace[..., None]
    w[degenerate] = 0.
    return w, degenerate


def mvdr_souden(phi_target: np.ndarray, phi_distortion: np.ndarray, ref: int):
    """
    w = (Phi_n^-1 Phi_x / trace(Phi_n^-1 Phi_x)) e_ref.

    Accepts single [M, M] matrices or stacks [..., M, M]. Returns w and a degenerate
    flag which is set (and w zeroed) where |trace| < 1e-12.
    """
    phi_target = np.asarray(phi_target, dtype=np.complex128)
    m = phi_target.shape[-1]
    if not 0 <= ref < m:
        msg = "Reference channel {} out of range for {} channels".format(ref, m)
        logger.error(msg)
        raise ValueError(msg)
    return _mvdr_batch(phi_target, np.asarray(phi_distortion, dtype=np.complex128), ref)


def snr_score(phi_target: np.ndarray, phi_distortion: np.ndarray, w: np.ndarray) -> float:
    """sum_f (w^H Phi_x w) / (w^H Phi_n w); zero beamformers contribute nothing."""
    signal = np.real(np.einsum('fm,fmn,fn->f', np.conj(w), phi_target, w))
    distortion = np.real(np.einsum('fm,fmn,fn->f', np.conj(w), phi_distortion, w))
    valid = distortion > 0
    return float(np.sum(signal[valid] / distortion[valid]))


def select_reference_channel(phi_target: np.ndarray, phi_distortion: np.ndarray, candidates: np.ndarray) -> int:
    """
    Pick the reference whose beamformer maximizes the summed output SNR.

    Parameters:
        phi_target, phi_distortion:
            SCMs [F, M, M].

        candidates:
            Beamformers [M_ref, F, M], one set per reference channel.

    Returns:
        The best reference; scores within a relative 1e-9 of the maximum count as ties,
        which go to the lowest channel index.

    """
    scores = np.array([snr_score(phi_target, phi_distortion, w) for w in candidates])
    best = np.max(scores)
    tied = np.flatnonzero(scores >= best - TIE_TOLERANCE * abs(best))
    logger.debug("Reference channel SNR scores: {}".format(np.round(scores, 4).tolist()))
    return int(tied[0])


def extract_with_beamformer(spec: MultichannelSpectrogram, beamformers) -> SourceEstimates:
    """d_hat_{f,t,k} = w_{f,k}^H y_{f,t} for a BeamformerSet or a raw [F, K, M] array."""
    w = beamformers.w if isinstance(beamformers, BeamformerSet) else np.asarray(beamformers)
    if w.shape[0] != spec.num_bins or w.shape[2] != spec.num_channels:
        msg = "Beamformer shape {} does not fit spectrogram {}".format(w.shape, spec.shape)
        logger.error(msg)
        raise ValueError(msg)
    estimates = np.einsum('fkm,ftm->ftk', np.conj(w), spec.data, optimize=True)
    return SourceEstimates(estimates, spec.config, spec.sample_rate)


def select_noise_class(pi: np.ndarray) -> int:
    """The class with the lowest average mixture weight."""
    return int(np.argmin(np.mean(pi, axis=0)))


def target_classes_without_noise(pi: np.ndarray) -> list:
    noise = select_noise_class(pi)
    return [k for k in range(pi.shape[1]) if k != noise]


def beamform_from_masks(spec: MultichannelSpectrogram, masks: np.ndarray, target_classes: list = None,
                        ref_channel: int = None):
    """
    One MVDR beamformer per target class.

    Parameters:
        spec:
            Observations [F, T, M].

        masks:
            Class posteriors [F, T, K_cls].

        target_classes:
            Classes to extract, in output order; defaults to all classes.

        ref_channel:
            Fixed reference microphone. If None the reference is selected per source.

    Returns:
        SourceEstimates [F, T, K] and the BeamformerSet.

    """
    if target_classes is None:
        target_classes = list(range(masks.shape[-1]))
    m = spec.num_channels
    weights, references, degenerate = list(), list(), list()
    for k in target_classes:
        phi_target = estimate_scm(spec, masks[..., k])
        phi_distortion, empty = estimate_scm(spec, 1. - masks[..., k], return_degenerate=True)
        if np.any(empty):
            logger.warning("Class {} covers all bins at {} frequencies; distortion covariance is loading only."
                           .format(k, int(np.sum(empty))))
        if ref_channel is None:
            candidates = [_mvdr_batch(phi_target, phi_distortion, ref) for ref in range(m)]
            ref = select_reference_channel(phi_target, phi_distortion, np.stack([c[0] for c in candidates]))
            w, flags = candidates[ref]
        else:
            ref = int(ref_channel)
            w, flags = mvdr_souden(phi_target, phi_distortion, ref)
        flags = flags | empty
        weights.append(w)
        references.append(ref)
        degenerate.append(flags)

    beamformers = BeamformerSet(np.stack(weights, axis=1), references, np.stack(degenerate, axis=1))
    if beamformers.num_degenerate:
        logger.warning("{} degenerate beamformer bins.".format(beamformers.num_degenerate))
    logger.info("MVDR beamformers for classes {} with reference channels {}".format(target_classes, references))
    return extract_with_beamformer(spec, beamformers), beamformers


def mask_multiply(spec: MultichannelSpectrogram, masks: np.ndarray, target_classes: list = None,
                  ref_channel: int = 0) -> SourceEstimates:
    """Debug extraction d_hat = gamma_k * y_ref."""
    if target_classes is None:
        target_classes = list(range(masks.shape[-1]))
    estimates = masks[..., target_classes] * spec.data[..., ref_channel][..., None]
    return SourceEstimates(estimates, spec.config, spec.sample_rate)
