"""Shared numerical-linear-algebra policies.

All rank decisions and pseudoinverses in the package go through the
helpers below so that a single SVD threshold policy applies everywhere.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

# Multiplier on the machine-precision rank threshold; exact-rank statements
# in the underlying theory need an explicit floating-point policy.
DEFAULT_RANK_MULTIPLIER = 1e3

_EPS = np.finfo(float).eps


def rank_threshold(sv: np.ndarray, shape: tuple[int, int], multiplier: float | None = None) -> float:
    if multiplier is None:
        multiplier = DEFAULT_RANK_MULTIPLIER
    if sv.size == 0:
        return 0.0
    return multiplier * max(shape) * _EPS * float(sv[0])


def singular_values(a: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(a: np.ndarray, multiplier: float | None = None) -> int:
    """Rank of ``a`` under the shared SVD threshold policy."""
    a = np.atleast_2d(a)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv > rank_threshold(sv, a.shape, multiplier)))


def pinv(a: np.ndarray, multiplier: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the shared threshold policy."""
    a = np.atleast_2d(a)
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    if multiplier is None:
        multiplier = DEFAULT_RANK_MULTIPLIER
    return np.linalg.pinv(a, rcond=multiplier * max(a.shape) * _EPS)


def spectral_abscissa(a: np.ndarray) -> float:
    """Largest real part over the spectrum of ``a``."""
    if a.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(a).real))


def symmetric_two_norm(a: np.ndarray) -> float:
    """Two-norm of a symmetric matrix via its extreme eigenvalues."""
    if a.size == 0:
        return 0.0
    w = np.linalg.eigvalsh(a)
    return float(max(abs(w[0]), abs(w[-1])))


def pbh_detectable(a: np.ndarray, c: np.ndarray, tol: float = 1e-8,
                   multiplier: float | None = None) -> bool:
    """PBH test: every eigenvalue of ``a`` with Re >= -tol must be observable.

    rank([lam*I - a; c]) = n at each such eigenvalue is equivalent to
    detectability of the pair (a, c).
    """
    n = a.shape[0]
    for lam in np.linalg.eigvals(a):
        if lam.real >= -tol:
            pencil = np.vstack([lam * np.eye(n) - a, c.astype(complex)])
            if numerical_rank(pencil, multiplier) < n:
                return False
    return True


def block_diag(blocks) -> np.ndarray:
    blocks = list(blocks)
    if not blocks:
        return np.zeros((0, 0))
    return scipy.linalg.block_diag(*blocks)


def coupling_matrix(e_blocks, k_blocks, laplacian: np.ndarray) -> np.ndarray:
    """Assemble blockdiag(E_i) - blockdiag(K_i) (L kron I)."""
    e_blocks = list(e_blocks)
    n = e_blocks[0].shape[0]
    return block_diag(e_blocks) - block_diag(k_blocks) @ np.kron(laplacian, np.eye(n))
