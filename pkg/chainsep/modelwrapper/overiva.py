"""Overdetermined independent vector analysis with iterative projection updates.

The extended demixing matrix W_tilde [F, M, M] stacks K source rows (each
row is w^H) on top of the background block U = [J, -I]. Source estimates
are d_hat_{f,t} = W_tilde[f, :K] y_{f,t}.
"""
import numpy as np

from chainsep.base.signals import MultichannelSpectrogram, SourceEstimates
from chainsep.helper.hermitian_linalg import (hermitize, load_diagonal, logdet_hermitian, log_abs_det, is_singular,
                                              solve_general, DEFAULT_LOADING)
from chainsep.seplogger.logger import logger

VARIANCE_FLOOR = 1e-10
ABSOLUTE_VARIANCE_FLOOR = 1e-30
RETRY_LOADING = 1e-6


class IvaState:
    """
    Parameters:
        W_tilde:
            Extended demixing matrices [F, M, M].

        r:
            Source variances [T, K].

        num_sources:
            K.

    """
    def __init__(self, W_tilde: np.ndarray, r: np.ndarray, num_sources: int):
        self.W_tilde = W_tilde
        self.r = r
        self.num_sources = num_sources
        self.nll = list()
        self.skipped_rows = 0
        self.background_failures = 0

    @property
    def W(self) -> np.ndarray:
        return self.W_tilde[:, :self.num_sources]

    @property
    def U(self) -> np.ndarray:
        return self.W_tilde[:, self.num_sources:]


def demix(spec: MultichannelSpectrogram, W: np.ndarray) -> np.ndarray:
    """Apply demixing rows [F, K, M] to the observations, returns [F, T, K]."""
    return np.einsum('fkm,ftm->ftk', W, spec.data, optimize=True)


def _floor_variances(raw: np.ndarray) -> np.ndarray:
    mean = np.mean(raw)
    floor = VARIANCE_FLOOR * mean if mean > 0 else ABSOLUTE_VARIANCE_FLOOR
    return np.maximum(raw, floor)


def update_source_variances(spec: MultichannelSpectrogram, W: np.ndarray) -> np.ndarray:
    """r_{t,k} = mean_f |w_{f,k}^H y_{f,t}|^2, floored at 1e-10 times the mean over all t and k."""
    return _floor_variances(np.mean(np.abs(demix(spec, W)) ** 2, axis=0))


def weighted_covariance(y: np.ndarray, r_k: np.ndarray) -> np.ndarray:
    """R_f = mean_t y y^H / r_t for y [F, T, M] (or a single frequency [T, M]) and r_k [T]."""
    y = np.asarray(y)
    single = y.ndim == 2
    if single:
        y = y[None]
    R = np.einsum('ftm,ftn->fmn', y / r_k[None, :, None], np.conj(y), optimize=True) / y.shape[1]
    R = load_diagonal(hermitize(R), DEFAULT_LOADING)
    return R[0] if single else R


def observation_covariance(spec: MultichannelSpectrogram) -> np.ndarray:
    """Sigma_{y,f} = mean_t y y^H over all frames, loaded."""
    y = spec.data
    sigma = np.einsum('ftm,ftn->fmn', y, np.conj(y), optimize=True) / spec.num_frames
    return load_diagonal(hermitize(sigma), DEFAULT_LOADING)


def _ip_solve(W_tilde: np.ndarray, R: np.ndarray, k: int):
    m = W_tilde.shape[-1]
    A = W_tilde @ R
    singular = is_singular(A)
    w = np.zeros(W_tilde.shape[:-1], dtype=np.complex128)
    ok = ~singular
    if np.any(ok):
        e_k = np.zeros((int(np.sum(ok)), m, 1), dtype=np.complex128)
        e_k[:, k] = 1.
        w[ok] = solve_general(A[ok], e_k)[..., 0]
        norm = np.sqrt(np.real(np.einsum('fm,fmn,fn->f', np.conj(w[ok]), R[ok], w[ok])))
        w[ok] /= norm[:, None]
    return w, singular


def ip_update_rows(W_tilde: np.ndarray, R: np.ndarray, k: int):
    """
    Iterative projection for row k at every frequency.

    Solves (W_tilde R) w = e_k and normalizes w^H R w = 1. Where the system is singular
    R is reloaded with 1e-6 and the solve retried once; frequencies still singular keep
    their row and are reported in the returned boolean mask.

    Returns:
        New w [F, M] (zero where skipped) and the skip mask [F].

    """
    w, singular = _ip_solve(W_tilde, R, k)
    if np.any(singular):
        retry = np.flatnonzero(singular)
        w_retry, still = _ip_solve(W_tilde[retry], load_diagonal(R[retry], RETRY_LOADING), k)
        w[retry] = w_retry
        singular[retry] = still
    return w, singular


def ip_update_row(W_tilde: np.ndarray, R: np.ndarray, k: int):
    """Single-frequency form of ip_update_rows; returns None if the row had to be skipped."""
    w, skipped = ip_update_rows(W_tilde[None], R[None], k)
    return None if skipped[0] else w[0]


def update_background(W: np.ndarray, sigma_y: np.ndarray):
    """
    Background rows U = [J, -I] with J (E1 Sigma_y W^H) = E2 Sigma_y W^H.

    Parameters:
        W:
            Source rows [F, K, M] or [K, M] (rows hold w^H).

        sigma_y:
            Observation covariance [F, M, M] or [M, M].

    Returns:
        U [F, M-K, M] (or [M-K, M]) and the boolean failure mask [F]; failed frequencies get
        J = 0 and should keep their previous U.

    """
    single = W.ndim == 2
    if single:
        W, sigma_y = W[None], sigma_y[None]
    f, k, m = W.shape
    U = np.zeros((f, m - k, m), dtype=np.complex128)
    failed = np.zeros(f, dtype=bool)
    if m > k:
        product = sigma_y @ np.conj(np.swapaxes(W, -1, -2))
        upper, lower = product[:, :k], product[:, k:]
        failed = is_singular(upper)
        ok = ~failed
        # J = lower upper^-1  <=>  upper^T J^T = lower^T
        if np.any(ok):
            J = solve_general(np.swapaxes(upper[ok], -1, -2), np.swapaxes(lower[ok], -1, -2))
            U[ok, :, :k] = np.swapaxes(J, -1, -2)
        U[:, :, k:] = -np.eye(m - k)
    if single:
        return U[0], failed[0]
    return U, failed


def negative_log_likelihood(spec: MultichannelSpectrogram, W_tilde: np.ndarray, num_sources: int,
                            sigma_y: np.ndarray) -> float:
    """
    NLL of the model with Gaussian sources of variance r (re-estimated from W) and a Gaussian
    background whose covariance takes its optimal value U Sigma_y U^H.
    """
    f, t, m = spec.shape
    k = num_sources
    r = update_source_variances(spec, W_tilde[:, :k])
    value = -2. * t * np.sum(log_abs_det(W_tilde))
    if m > k:
        U = W_tilde[:, k:]
        value += t * np.sum(logdet_hermitian(U @ sigma_y @ np.conj(np.swapaxes(U, -1, -2)))) + f * t * (m - k)
    value += t * k * f + f * np.sum(np.log(r))
    return float(value)


def minimum_distortion_rescale(estimates: SourceEstimates, spec: MultichannelSpectrogram,
                               ref_channel: int = 0, return_scales: bool = False):
    """
    Rescale each (f, k) by beta = sum_t y_ref d_hat^* / sum_t |d_hat|^2.

    All-zero estimates are left unchanged.
    """
    d = estimates.data
    y_ref = spec.data[..., ref_channel]
    energy = np.sum(np.abs(d) ** 2, axis=1)
    cross = np.einsum('ft,ftk->fk', y_ref, np.conj(d))
    beta = np.ones(energy.shape, dtype=np.complex128)
    nonzero = energy > 0
    beta[nonzero] = cross[nonzero] / energy[nonzero]
    rescaled = SourceEstimates(d * beta[:, None, :], estimates.config, estimates.sample_rate)
    if return_scales:
        return rescaled, beta
    return rescaled


def run_overiva(spec: MultichannelSpectrogram, num_sources: int, iterations: int = 100,
                W_init: np.ndarray = None, ref_channel: int = 0, rescale: bool = True,
                track_nll: bool = True, row_callback=None):
    """
    OverIVA main loop.

    Parameters:
        spec:
            Observations [F, T, M] with M >= K.

        num_sources:
            K.

        iterations:
            Outer iterations.

        W_init:
            Initial extended demixing matrices [F, M, M]; identity if None.

        ref_channel:
            Reference microphone of the minimum distortion rescaling.

        rescale:
            Apply minimum distortion rescaling to the returned estimates.

        row_callback:
            Optional callable(W_tilde, R, k) invoked after each row update, e.g. to check
            the normalization invariant.

    Returns:
        IvaState and SourceEstimates [F, T, K].

    """
    f, t, m = spec.shape
    k_count = int(num_sources)
    if not 1 <= k_count <= m:
        msg = "OverIVA needs 1 <= K <= M, got K={} for M={}".format(k_count, m)
        logger.error(msg)
        raise ValueError(msg)
    if iterations < 1:
        msg = "OverIVA needs at least one iteration, got {}".format(iterations)
        logger.error(msg)
        raise ValueError(msg)

    if W_init is None:
        W_tilde = np.tile(np.eye(m, dtype=np.complex128), (f, 1, 1))
    else:
        W_tilde = np.array(W_init, dtype=np.complex128)
        if W_tilde.shape != (f, m, m):
            msg = "Initial demixing matrices have shape {}, expected {}".format(W_tilde.shape, (f, m, m))
            logger.error(msg)
            raise ValueError(msg)

    sigma_y = observation_covariance(spec)
    y = spec.data
    state = IvaState(W_tilde, update_source_variances(spec, W_tilde[:, :k_count]), k_count)
    if track_nll:
        state.nll.append(negative_log_likelihood(spec, W_tilde, k_count, sigma_y))

    for iteration in range(iterations):
        for k in range(k_count):
            state.r = update_source_variances(spec, W_tilde[:, :k_count])
            r_k = state.r[:, k]
            R = weighted_covariance(y, r_k)
            w, skipped = ip_update_rows(W_tilde, R, k)
            W_tilde[~skipped, k] = np.conj(w[~skipped])
            state.skipped_rows += int(np.sum(skipped))
            if row_callback is not None:
                row_callback(W_tilde, R, k)
            if m > k_count:
                U, failed = update_background(W_tilde[:, :k_count], sigma_y)
                W_tilde[~failed, k_count:] = U[~failed]
                state.background_failures += int(np.sum(failed))
        if track_nll:
            state.nll.append(negative_log_likelihood(spec, W_tilde, k_count, sigma_y))
            logger.debug("OverIVA iteration {}: NLL {:.6f}".format(iteration + 1, state.nll[-1]))

    state.W_tilde = W_tilde
    state.r = update_source_variances(spec, W_tilde[:, :k_count])
    if state.skipped_rows:
        logger.warning("OverIVA skipped {} singular row updates.".format(state.skipped_rows))
    estimates = SourceEstimates(demix(spec, W_tilde[:, :k_count]), spec.config, spec.sample_rate)
    if rescale:
        estimates = minimum_distortion_rescale(estimates, spec, ref_channel)
    logger.info("OverIVA finished {} iterations with K={}, M={}".format(iterations, k_count, m))
    return state, estimates
