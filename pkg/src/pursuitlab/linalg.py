"""Dense primitives shared by every recovery algorithm.

Matrices are plain C-ordered ``float64`` numpy arrays (row-major), index
sets are sorted ``int64`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._backend import kernels

#: Pivot ratio under which the restricted Gram matrix is treated as singular.
RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RestrictedLsSolution:
    estimate: np.ndarray
    residual: np.ndarray
    residual_norm: float
    rank_deficient: bool
    #: ``max|phi_T^T r| / (|y| * max column norm)``; zero for a zero ``y``.
    orthogonality: float = 0.0


def as_matrix(phi) -> np.ndarray:
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[0] < 1 or phi.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("matrix has non-finite entries")
    return phi


def index_set(indices, n: int) -> np.ndarray:
    """Normalise ``indices`` to a sorted, duplicate-free ``int64`` array in [0, n)."""
    idx = np.unique(np.asarray(indices, dtype=np.int64).ravel())
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError(f"indices out of range [0, {n})")
    return idx


def top_k_indices(v, k: int) -> np.ndarray:
    """Indices of the ``k`` largest-magnitude entries of ``v``.

    Ties are broken toward the smaller index, so the result is a
    deterministic function of ``v``.  Returned sorted ascending.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("v must be a vector")
    k = int(k)
    if k <= 0 or k > v.shape[0]:
        raise ValueError(f"k must lie in [1, {v.shape[0]}], got {k}")
    return kernels.top_k(np.ascontiguousarray(v), k)


def correlate(phi, r) -> np.ndarray:
    """Return ``phi.T @ r``."""
    phi = np.asarray(phi)
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or phi.ndim != 2 or phi.shape[0] != r.shape[0]:
        raise ValueError(
            f"dimension mismatch: phi {phi.shape} vs r {r.shape}")
    return phi.T @ r


def restricted_least_squares(phi, y, support) -> RestrictedLsSolution:
    """Minimise ``|y - phi z|_2`` over ``z`` supported on ``support``.

    Solved by QR with column pivoting on ``phi[:, support]``.  When a pivot
    falls below ``RANK_TOLERANCE`` relative to the first one, the
    minimum-norm solution is returned and ``rank_deficient`` is set.
    """
    support = np.ascontiguousarray(support, dtype=np.int64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    m, n = phi.shape
    k = support.shape[0]
    if k == 0:
        raise ValueError("support must be non-empty")
    if k > m:
        raise ValueError(f"support size {k} exceeds the number of rows {m}")
    coef, residual, rank, gmax, colmax = kernels.qr_solve(phi, y, support, RANK_TOLERANCE)
    if coef is None:
        a = phi[:, support]
        coef = scipy.linalg.lstsq(a, y, cond=RANK_TOLERANCE, check_finite=False,
                                  lapack_driver="gelsd")[0]
        residual = y - a @ coef
        gmax = float(np.abs(a.T @ residual).max())
    estimate = np.zeros(n)
    estimate[support] = coef
    y_norm = float(np.sqrt(y @ y))
    ortho = gmax / (y_norm * colmax) if y_norm > 0 and colmax > 0 else 0.0
    return RestrictedLsSolution(estimate, residual, float(np.sqrt(residual @ residual)),
                                rank < k, ortho)


def hard_threshold(v, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(v restricted to top_k_indices(v, k), those indices)``."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if k <= 0 or k > v.shape[0]:
        raise ValueError(f"k must lie in [1, {v.shape[0]}], got {k}")
    return kernels.hard_threshold(v, int(k))
