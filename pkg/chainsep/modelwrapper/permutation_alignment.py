"""Frequency permutation alignment of class posteriors.

Each frequency carries an activity profile per class (its posteriors over
time). Profiles are greedily matched against running centroid profiles by
cosine similarity, most confident frequencies first.
"""
import itertools

import numpy as np

from chainsep.seplogger.logger import logger

PASSES = 2


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0:
        return 0.
    return float(np.dot(a, b) / norm)


def visit_order(gamma: np.ndarray) -> np.ndarray:
    """Frequencies sorted by descending confidence log K - mean_t H(gamma_{f,t})."""
    k = gamma.shape[-1]
    with np.errstate(divide='ignore', invalid='ignore'):
        entropy = -np.sum(np.where(gamma > 0, gamma * np.log(gamma), 0.), axis=-1)
    confidence = np.log(k) - np.mean(entropy, axis=1)
    # stable sort keeps the frequency order among equally confident bins
    return np.argsort(-confidence, kind='stable')


def permute_classes(tensor: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Reorder the class axis (axis 1, after frequency) so that new[f, k] = old[f, perm[f, k]]."""
    index = np.arange(tensor.shape[0])[:, None]
    return tensor[index, perm]


def apply_permutation(gamma: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """gamma_new[f, :, k] = gamma[f, :, perm[f, k]]."""
    return np.take_along_axis(gamma, perm[:, None, :], axis=2)


def solve_permutation(gamma: np.ndarray, passes: int = PASSES):
    """
    Align classes across frequencies.

    Parameters:
        gamma:
            Posteriors [F, T, K].

        passes:
            Number of sweeps over all frequencies.

    Returns:
        The aligned posteriors and the permutation array perm [F, K] relative to the input.

    """
    f_count, _, k = gamma.shape
    perm = np.tile(np.arange(k), (f_count, 1))
    if k == 1:
        return gamma.copy(), perm

    candidates = [np.array(p) for p in itertools.permutations(range(k))]
    aligned = gamma.copy()
    changed = 0
    for _ in range(passes):
        # profiles [F, K, T]
        profiles = np.transpose(aligned, (0, 2, 1))
        centroids = np.mean(profiles, axis=0)
        seen = 1
        for f in visit_order(aligned):
            scores = [sum(cosine_similarity(profiles[f, p[c]], centroids[c]) for c in range(k))
                      for p in candidates]
            best = candidates[int(np.argmax(scores))]
            if np.any(best != np.arange(k)):
                changed += 1
                aligned[f] = aligned[f][:, best]
                perm[f] = perm[f][best]
            centroids += (aligned[f].T - centroids) / (seen + 1)
            seen += 1
    logger.debug("Permutation solver reordered classes at {} frequency visits.".format(changed))
    return aligned, perm
