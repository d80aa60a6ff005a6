"""Complex angular central Gaussian mixture model (cACGMM) on unit-norm observations.

Tensor layout:
    y_tilde  [F, T, M]
    B        [F, K, M, M]  shape matrices, trace normalized to M
    pi       [T, K]        time-varying, frequency-shared mixture weights
    gamma    [F, T, K]     class posteriors (the masks)
"""
import numpy as np
from scipy.special import gammaln, logsumexp

from chainsep.base.signals import MultichannelSpectrogram
from chainsep.helper.hermitian_linalg import (hermitize, load_diagonal, batched_inv_hermitian, logdet_hermitian,
                                              solve_hermitian, DEFAULT_LOADING)
from chainsep.modelwrapper.permutation_alignment import solve_permutation, permute_classes
from chainsep.seplogger.logger import logger

SILENCE_FLOOR = 1e-8
PI_FLOOR = 1e-6
RESEED_MASS = 1e-3
INIT_PERTURBATION = 0.1
INIT_MODES = ['random', 'mask']


class NormalizedObservations:

    def __init__(self, y_tilde: np.ndarray, silent_mask: np.ndarray):
        self.y_tilde = y_tilde
        self.silent_mask = silent_mask

    @property
    def shape(self):
        return self.y_tilde.shape


class SmmState:
    """
    Parameters of the spatial mixture model.

    Parameters:
        B:
            Shape matrices [F, K_cls, M, M].

        pi:
            Mixture weights [T, K_cls], rows on the simplex.

        gamma:
            Posteriors [F, T, K_cls], last axis on the simplex.

    """
    def __init__(self, B: np.ndarray, pi: np.ndarray, gamma: np.ndarray = None):
        self.B = B
        self.pi = pi
        self.gamma = gamma

    @property
    def num_classes(self) -> int:
        return self.pi.shape[1]

    def copy(self) -> 'SmmState':
        return SmmState(self.B.copy(), self.pi.copy(), None if self.gamma is None else self.gamma.copy())


def normalize_observations(spec: MultichannelSpectrogram, floor: float = SILENCE_FLOOR) -> NormalizedObservations:
    """Scale every TF vector to unit norm; vectors below floor * RMS(||y||) are marked silent and set to e_1."""
    if floor <= 0:
        msg = "Silence floor must be positive, got {}".format(floor)
        logger.error(msg)
        raise ValueError(msg)
    y = spec.data
    norms = np.linalg.norm(y, axis=-1)
    rms = np.sqrt(np.mean(norms ** 2))
    silent = norms < floor * rms if rms > 0 else np.ones(norms.shape, dtype=bool)

    y_tilde = np.zeros_like(y)
    loud = ~silent
    y_tilde[loud] = y[loud] / norms[loud][:, None]
    y_tilde[silent, 0] = 1.
    return NormalizedObservations(y_tilde, silent)


def _log_normalizer(m: int) -> float:
    return gammaln(m) - np.log(2.) - m * np.log(np.pi)


def cacg_log_pdf(y_tilde: np.ndarray, B: np.ndarray) -> float:
    """
    log A(y; B) = log((M-1)!) - log 2 - M log(pi) - log det B - M log(y^H B^-1 y).
    """
    y_tilde = np.asarray(y_tilde, dtype=np.complex128)
    m = y_tilde.shape[0]
    quadratic = np.real(np.vdot(y_tilde, solve_hermitian(B, y_tilde)))
    return float(_log_normalizer(m) - logdet_hermitian(B) - m * np.log(quadratic))


def _quadratic_forms(y_tilde: np.ndarray, B: np.ndarray) -> np.ndarray:
    # y^H B^-1 y for every (f, k, t)
    B_inv = batched_inv_hermitian(B)
    quadratic = np.real(np.einsum('ftm,fkmn,ftn->fkt', np.conj(y_tilde), B_inv, y_tilde, optimize=True))
    return np.maximum(quadratic, np.finfo(float).tiny)


def log_pdf_tensor(obs: NormalizedObservations, B: np.ndarray) -> np.ndarray:
    """cACG log densities of all bins under all classes, shape [F, T, K]."""
    m = obs.y_tilde.shape[-1]
    quadratic = _quadratic_forms(obs.y_tilde, B)
    log_pdf = _log_normalizer(m) - logdet_hermitian(B)[:, :, None] - m * np.log(quadratic)
    return np.transpose(log_pdf, (0, 2, 1))


def _log_joint(obs: NormalizedObservations, state: SmmState) -> np.ndarray:
    with np.errstate(divide='ignore'):
        log_pi = np.log(state.pi)
    return log_pi[None, :, :] + log_pdf_tensor(obs, state.B)


def log_likelihood(obs: NormalizedObservations, state: SmmState) -> float:
    """sum over non-silent bins of log sum_k pi_{t,k} A(y_{f,t}; B_{f,k})."""
    per_bin = logsumexp(_log_joint(obs, state), axis=-1)
    return float(np.sum(per_bin[~obs.silent_mask]))


def e_step(obs: NormalizedObservations, state: SmmState, return_log_likelihood: bool = False):
    """
    Class posteriors gamma_{f,t,k} proportional to pi_{t,k} A(y_{f,t}; B_{f,k}).

    Silent bins receive the uniform posterior.
    """
    k = state.num_classes
    log_joint = _log_joint(obs, state)
    normalizer = logsumexp(log_joint, axis=-1, keepdims=True)
    gamma = np.exp(log_joint - normalizer)
    gamma /= np.sum(gamma, axis=-1, keepdims=True)
    gamma[obs.silent_mask] = 1. / k
    if return_log_likelihood:
        return gamma, float(np.sum(normalizer[..., 0][~obs.silent_mask]))
    return gamma


def m_step_B(obs: NormalizedObservations, gamma: np.ndarray, prev_B: np.ndarray) -> np.ndarray:
    """
    One fixed-point sweep B = M sum_t gamma y y^H / (y^H B_prev^-1 y) / sum_t gamma.

    Classes without posterior mass at a frequency keep their previous shape matrix.
    """
    y = obs.y_tilde
    m = y.shape[-1]
    active = np.where(obs.silent_mask[..., None], 0., gamma)
    mass = np.sum(active, axis=1)
    quadratic = _quadratic_forms(y, prev_B)
    weights = np.transpose(active, (0, 2, 1)) / quadratic
    B = m * np.einsum('fkt,ftm,ftn->fkmn', weights, y, np.conj(y), optimize=True)

    has_mass = mass > 0
    B[has_mass] /= mass[has_mass][:, None, None]
    B[~has_mass] = prev_B[~has_mass]

    B = load_diagonal(hermitize(B), DEFAULT_LOADING)
    return normalize_trace(B)


def normalize_trace(B: np.ndarray) -> np.ndarray:
    m = B.shape[-1]
    trace = np.real(np.trace(B, axis1=-2, axis2=-1))
    return B * (m / trace)[..., None, None]


def m_step_pi(gamma: np.ndarray, silent_mask: np.ndarray = None) -> np.ndarray:
    """pi_{t,k} = mean over non-silent frequencies of gamma, floored at 1e-6 and renormalized."""
    f, t, k = gamma.shape
    if silent_mask is None:
        silent_mask = np.zeros((f, t), dtype=bool)
    loud = (~silent_mask).astype(float)
    counts = np.sum(loud, axis=0)
    pi = np.einsum('ftk,ft->tk', gamma, loud)
    pi[counts > 0] /= counts[counts > 0][:, None]
    pi[counts == 0] = 1. / k
    pi = np.maximum(pi, PI_FLOOR)
    return pi / np.sum(pi, axis=1, keepdims=True)


def initial_shape_matrices(num_bins: int, num_classes: int, num_channels: int,
                           rng: np.random.Generator) -> np.ndarray:
    """B_k = I + 0.1 G_k G_k^H with complex Gaussian G_k, shared across frequencies."""
    m = num_channels
    G = (rng.standard_normal((num_classes, m, m)) + 1j * rng.standard_normal((num_classes, m, m))) / np.sqrt(2)
    B = np.eye(m) + INIT_PERTURBATION * G @ np.conj(np.swapaxes(G, -1, -2))
    B = normalize_trace(hermitize(B))
    return np.broadcast_to(B, (num_bins, num_classes, m, m)).copy()


def reseed_dead_classes(obs: NormalizedObservations, gamma: np.ndarray, B: np.ndarray,
                        rng: np.random.Generator) -> list:
    """Replace the shape matrices of classes whose total posterior mass fell below 1e-3 * F * T."""
    f, t, k = gamma.shape
    mass = np.sum(np.where(obs.silent_mask[..., None], 0., gamma), axis=(0, 1))
    dead = [int(c) for c in np.flatnonzero(mass < RESEED_MASS * f * t)]
    if not dead:
        return dead
    y = obs.y_tilde
    m = y.shape[-1]
    loud = (~obs.silent_mask).astype(float)
    global_shape = np.einsum('ft,ftm,ftn->fmn', loud, y, np.conj(y)) / \
        np.maximum(np.sum(loud, axis=1), 1.)[:, None, None]
    for c in dead:
        G = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
        perturbation = INIT_PERTURBATION * G @ np.conj(G.T)
        B[:, c] = normalize_trace(load_diagonal(hermitize(global_shape + perturbation[None]), DEFAULT_LOADING))
        logger.warning("cACGMM class {} lost its posterior mass and was reseeded.".format(c))
    return dead


def run_cacgmm(spec: MultichannelSpectrogram, num_classes: int, iterations: int = 20, seed: int = 0,
               init: str = 'random', initial_masks: np.ndarray = None, permutation_solver: bool = True,
               floor: float = SILENCE_FLOOR):
    """
    Fit the mixture model by EM.

    Parameters:
        spec:
            Observations [F, T, M].

        num_classes:
            Number of mixture classes (speakers plus an optional noise class).

        iterations:
            EM iterations, each one E-step, permutation alignment, B sweep and pi update.

        seed:
            Seeds the initial shape matrices and the reseeding of dead classes.

        init:
            'random' shape matrices or 'mask', which starts with an M-step on initial_masks [F, T, K_cls].

        permutation_solver:
            Align classes across frequencies after every E-step.

    Returns:
        Final SmmState, the masks (final posteriors) and a dict with the convergence trace.

    """
    if iterations < 1:
        msg = "cACGMM needs at least one iteration, got {}".format(iterations)
        logger.error(msg)
        raise ValueError(msg)
    if num_classes < 1:
        msg = "cACGMM needs at least one class, got {}".format(num_classes)
        logger.error(msg)
        raise ValueError(msg)
    if init not in INIT_MODES:
        msg = "Unknown cACGMM init '{}', choose from {}".format(init, INIT_MODES)
        logger.error(msg)
        raise ValueError(msg)

    rng = np.random.default_rng(seed)
    obs = normalize_observations(spec, floor)
    f, t, m = obs.shape
    logger.debug("cACGMM on {} bins x {} frames x {} channels, {} classes, {} silent bins".format(
        f, t, m, num_classes, int(np.sum(obs.silent_mask))))

    if init == 'mask':
        if initial_masks is None or initial_masks.shape != (f, t, num_classes):
            msg = "init='mask' needs initial masks of shape {}".format((f, t, num_classes))
            logger.error(msg)
            raise ValueError(msg)
        gamma = initial_masks / np.sum(initial_masks, axis=-1, keepdims=True)
        identity = np.broadcast_to(np.eye(m, dtype=np.complex128), (f, num_classes, m, m))
        state = SmmState(m_step_B(obs, gamma, identity), m_step_pi(gamma, obs.silent_mask))
    else:
        state = SmmState(initial_shape_matrices(f, num_classes, m, rng),
                         np.full((t, num_classes), 1. / num_classes))

    trace = {'log_likelihood': [], 'reseeded': 0}
    for i in range(iterations):
        gamma, ll = e_step(obs, state, return_log_likelihood=True)
        trace['log_likelihood'].append(ll)
        logger.debug("cACGMM iteration {}: log-likelihood {:.6f}".format(i + 1, ll))
        if permutation_solver and num_classes > 1:
            gamma, perm = solve_permutation(gamma)
            state.B = permute_classes(state.B, perm)
        state.B = m_step_B(obs, gamma, state.B)
        state.pi = m_step_pi(gamma, obs.silent_mask)
        trace['reseeded'] += len(reseed_dead_classes(obs, gamma, state.B, rng))

    gamma, ll = e_step(obs, state, return_log_likelihood=True)
    trace['log_likelihood'].append(ll)
    if permutation_solver and num_classes > 1:
        gamma, perm = solve_permutation(gamma)
        state.B = permute_classes(state.B, perm)
    state.gamma = gamma
    logger.info("cACGMM finished after {} iterations, log-likelihood {:.4f}".format(iterations, ll))
    return state, gamma, trace
