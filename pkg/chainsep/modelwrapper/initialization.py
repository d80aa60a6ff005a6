"""Initial extended demixing matrices for OverIVA."""
import numpy as np

from chainsep.base.signals import MultichannelSpectrogram, SourceEstimates
from chainsep.helper.hermitian_linalg import eigh, load_diagonal, batched_solve_hermitian, DEFAULT_LOADING
from chainsep.modelwrapper.overiva import observation_covariance, update_background
from chainsep.seplogger.logger import logger

INIT_MODES = ['identity', 'pca', 'from_estimates']


def init_identity(num_bins: int, num_channels: int) -> np.ndarray:
    return np.tile(np.eye(num_channels, dtype=np.complex128), (num_bins, 1, 1))


def _assemble(W: np.ndarray, sigma_y: np.ndarray) -> np.ndarray:
    f, k, m = W.shape
    W_tilde = np.zeros((f, m, m), dtype=np.complex128)
    W_tilde[:, :k] = W
    if m > k:
        U, failed = update_background(W, sigma_y)
        if np.any(failed):
            msg = "Background rows could not be computed at {} frequencies.".format(int(np.sum(failed)))
            logger.warning(msg)
            U[failed] = init_identity(int(np.sum(failed)), m)[:, k:]
        W_tilde[:, k:] = U
    return W_tilde


def pca_rows(sigma_y: np.ndarray, num_sources: int) -> np.ndarray:
    """Source rows w^H from the top-K eigenvectors of Sigma_y, largest eigenvalue first."""
    _, vectors = eigh(sigma_y)
    top = vectors[..., ::-1][..., :num_sources]
    return np.conj(np.swapaxes(top, -1, -2))


def init_pca(sigma_y: np.ndarray, num_sources: int) -> np.ndarray:
    """
    PCA initialization.

    Parameters:
        sigma_y:
            Observation covariance per frequency [F, M, M].

        num_sources:
            K; the remaining M - K rows are the matching background block.

    """
    return _assemble(pca_rows(sigma_y, num_sources), sigma_y)


def ls_demixing_rows(spec: MultichannelSpectrogram, estimates: SourceEstimates):
    """
    Least squares rows w = (sum_t y y^H)^-1 sum_t y d_hat^*, stored as w^H.

    Returns:
        Rows [F, K, M] and a boolean [F, K] marking all-zero estimates.

    """
    if spec.config != estimates.config or spec.num_frames != estimates.num_frames:
        msg = "Estimates ({}, {} frames) and observations ({}, {} frames) must share one STFT config".format(
            estimates.config, estimates.num_frames, spec.config, spec.num_frames)
        logger.error(msg)
        raise ValueError(msg)
    y = spec.data
    d = estimates.data
    t = spec.num_frames
    covariance = load_diagonal(np.einsum('ftm,ftn->fmn', y, np.conj(y), optimize=True) / t, DEFAULT_LOADING)
    cross = np.einsum('ftm,ftk->fkm', y, np.conj(d), optimize=True) / t
    k = d.shape[-1]
    w = batched_solve_hermitian(np.repeat(covariance[:, None], k, axis=1), cross)
    empty = np.sum(np.abs(d) ** 2, axis=1) == 0
    return np.conj(w), empty


def ls_init_from_estimates(spec: MultichannelSpectrogram, estimates: SourceEstimates,
                           sigma_y: np.ndarray = None):
    """
    Least squares initialization from source estimates at the IVA STFT config.

    All-zero estimates are replaced by the matching PCA row. Returns W_tilde [F, M, M]
    and the [F, K] fallback mask.
    """
    if sigma_y is None:
        sigma_y = observation_covariance(spec)
    W, empty = ls_demixing_rows(spec, estimates)
    if np.any(empty):
        logger.warning("{} all-zero estimate bins fall back to PCA rows.".format(int(np.sum(empty))))
        pca = pca_rows(sigma_y, W.shape[1])
        W[empty] = pca[empty]
    return _assemble(W, sigma_y), empty


class InitSpec:
    """
    How OverIVA starts.

    Parameters:
        mode:
            'identity', 'pca' or 'from_estimates'.

        estimates:
            SourceEstimates at the IVA STFT config, required for 'from_estimates'.

        source_count:
            K.

    """
    def __init__(self, mode: str = 'identity', estimates: SourceEstimates = None, source_count: int = 2):
        if mode not in INIT_MODES:
            msg = "Unknown init mode '{}', choose from {}".format(mode, INIT_MODES)
            logger.error(msg)
            raise ValueError(msg)
        if mode == 'from_estimates':
            if estimates is None:
                msg = "Init mode 'from_estimates' needs source estimates."
                logger.error(msg)
                raise ValueError(msg)
            if estimates.num_channels != source_count:
                msg = "Init mode 'from_estimates' needs exactly {} estimate channels, got {}".format(
                    source_count, estimates.num_channels)
                logger.error(msg)
                raise ValueError(msg)
        self.mode = mode
        self.estimates = estimates
        self.source_count = source_count
        self.fallback_mask = None

    def initial_demixing(self, spec: MultichannelSpectrogram, sigma_y: np.ndarray = None) -> np.ndarray:
        if self.mode == 'identity':
            return init_identity(spec.num_bins, spec.num_channels)
        if sigma_y is None:
            sigma_y = observation_covariance(spec)
        if self.mode == 'pca':
            return init_pca(sigma_y, self.source_count)
        W_tilde, self.fallback_mask = ls_init_from_estimates(spec, self.estimates, sigma_y)
        return W_tilde
