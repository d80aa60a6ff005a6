"""Small complex Hermitian linear algebra used by all estimators.

Matrices are tiny (M <= 8) and come in stacks over frequency bins, so every
routine accepts a trailing [..., M, M] layout. Factorizations are taken from
scipy / numpy LAPACK bindings; this module adds the error contract, diagonal
loading and deterministic eigenvector phases on top.
"""
import warnings

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, LinAlgWarning

from chainsep.base.errors import NotPositiveDefinite, SingularMatrix, ConvergenceFailure
from chainsep.seplogger.logger import logger

DEFAULT_LOADING = 1e-10
SINGULARITY_THRESHOLD = 1e-12


def hermitize(A: np.ndarray) -> np.ndarray:
    """(A + A^H) / 2 over the two trailing axes."""
    A = np.asarray(A, dtype=np.complex128)
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def load_diagonal(A: np.ndarray, eps_rel: float = DEFAULT_LOADING) -> np.ndarray:
    """
    Diagonal loading relative to the average eigenvalue.

    Parameters:
        A:
            Hermitian matrix or stack of matrices [..., M, M].

        eps_rel:
            Relative loading; A + eps_rel * trace(A) / M * I, or A + eps_rel * I where the trace is zero.

    """
    if eps_rel < 0:
        msg = "Diagonal loading must be non-negative, got {}".format(eps_rel)
        logger.error(msg)
        raise ValueError(msg)
    A = np.asarray(A, dtype=np.complex128)
    m = A.shape[-1]
    trace = np.real(np.trace(A, axis1=-2, axis2=-1))
    amount = np.where(trace == 0, eps_rel, eps_rel * trace / m)
    return A + amount[..., None, None] * np.eye(m)


def solve_hermitian(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for a Hermitian positive definite A by Cholesky."""
    A = hermitize(A)
    try:
        factor = cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        msg = "Cholesky factorization failed: matrix is not positive definite ({})".format(e)
        logger.error(msg)
        raise NotPositiveDefinite(msg) from e
    return cho_solve(factor, np.asarray(b, dtype=np.complex128))


def is_singular(A: np.ndarray):
    """
    Singularity test on the two trailing axes.

    Returns a bool for a single matrix and a boolean mask [...] for a stack; a matrix counts as
    singular when its smallest singular value is at most 1e-12 times the largest one.
    """
    singular_values = np.linalg.svd(np.asarray(A, dtype=np.complex128), compute_uv=False)
    singular = ~np.all(np.isfinite(singular_values), axis=-1) | \
        (singular_values[..., -1] <= SINGULARITY_THRESHOLD * singular_values[..., 0])
    if singular.ndim == 0:
        return bool(singular)
    return singular


def solve_general(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve A x = b by LU with partial pivoting; A need not be Hermitian.

    A may be a stack [..., M, M] with right-hand sides [..., M] or [..., M, N]. Callers that
    tolerate singular members should mask them out with is_singular first.
    """
    A = np.asarray(A, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    singular = is_singular(A)
    if np.any(singular):
        msg = "Matrix is singular to working precision."
        logger.error(msg)
        raise SingularMatrix(msg)
    if A.ndim > 2:
        vector = b.ndim == A.ndim - 1
        x = np.linalg.solve(A, b[..., None] if vector else b)
        return x[..., 0] if vector else x
    with warnings.catch_warnings():
        warnings.simplefilter('error', LinAlgWarning)
        try:
            factor = lu_factor(A, check_finite=True)
        except (LinAlgWarning, np.linalg.LinAlgError, ValueError) as e:
            msg = "LU factorization failed: {}".format(e)
            logger.error(msg)
            raise SingularMatrix(msg) from e
    return lu_solve(factor, b)


def canonicalize_phase(V: np.ndarray) -> np.ndarray:
    """Rotate every column so that its largest-magnitude entry is real and positive."""
    V = np.array(V, dtype=np.complex128)
    idx = np.argmax(np.abs(V), axis=-2)
    pivots = np.take_along_axis(V, idx[..., None, :], axis=-2)
    phases = pivots / np.maximum(np.abs(pivots), 1e-300)
    return V * np.conj(phases)


def eigh(A: np.ndarray):
    """
    Eigen decomposition of a Hermitian matrix (or stack).

    Returns:
        Ascending real eigenvalues [..., M] and unitary eigenvectors [..., M, M] stored in columns,
        each column phase-canonicalized.

    """
    A = hermitize(A)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(A)
    except np.linalg.LinAlgError as e:
        msg = "Hermitian eigen decomposition did not converge: {}".format(e)
        logger.error(msg)
        raise ConvergenceFailure(msg) from e
    return eigenvalues, canonicalize_phase(eigenvectors)


def logdet_hermitian(A: np.ndarray) -> np.ndarray:
    """log det of Hermitian positive definite matrices via Cholesky, stack aware."""
    try:
        L = np.linalg.cholesky(hermitize(A))
    except np.linalg.LinAlgError as e:
        msg = "Cannot take log-determinant: matrix is not positive definite."
        logger.error(msg)
        raise NotPositiveDefinite(msg) from e
    return 2. * np.sum(np.log(np.real(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)


def log_abs_det(A: np.ndarray) -> np.ndarray:
    """log |det A| from the LU pivots (numpy slogdet), stack aware."""
    _, value = np.linalg.slogdet(np.asarray(A, dtype=np.complex128))
    return value


def batched_solve_hermitian(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a stack of Hermitian positive definite systems [..., M, M] x = [..., M]."""
    try:
        L = np.linalg.cholesky(hermitize(A))
    except np.linalg.LinAlgError as e:
        msg = "Cholesky factorization failed for at least one matrix of the stack."
        logger.error(msg)
        raise NotPositiveDefinite(msg) from e
    z = np.linalg.solve(L, np.asarray(b, dtype=np.complex128)[..., None])
    return np.linalg.solve(np.conj(np.swapaxes(L, -1, -2)), z)[..., 0]


def batched_inv_hermitian(A: np.ndarray) -> np.ndarray:
    m = A.shape[-1]
    identity = np.broadcast_to(np.eye(m, dtype=np.complex128), A.shape)
    try:
        L = np.linalg.cholesky(hermitize(A))
    except np.linalg.LinAlgError as e:
        msg = "Cannot invert: matrix stack is not positive definite."
        logger.error(msg)
        raise NotPositiveDefinite(msg) from e
    L_inv = np.linalg.solve(L, identity)
    return hermitize(np.conj(np.swapaxes(L_inv, -1, -2)) @ L_inv)
