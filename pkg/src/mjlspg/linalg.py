"""Norms and small helpers for mode-indexed matrix tuples.

A mode tuple is stored as one ndarray of shape (Ns, n, m): entry ``i`` is
the matrix attached to operating mode ``i``.
"""

import numpy as np


def spectral_norm(mat):
    """Largest singular value of a single matrix."""
    return float(np.linalg.norm(mat, 2))


def tuple_norm_max(tup):
    """max_i ||V_i||, the largest per-mode spectral norm."""
    return max(spectral_norm(v) for v in tup)


def tuple_norm_1(tup):
    """sum_i ||V_i|| over modes."""
    return float(sum(spectral_norm(v) for v in tup))


def tuple_norm_2(tup):
    """sqrt(sum_i tr(V_i^T V_i)), the stacked Frobenius norm."""
    return float(np.sqrt(sum(np.sum(v * v) for v in tup)))


def min_eig_sym(mat):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(mat)[0])


def symmetrize(tup):
    """Average each block with its transpose (numerical hygiene)."""
    return 0.5 * (tup + np.swapaxes(tup, -1, -2))
