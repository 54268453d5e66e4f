"""Pure-numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` mirrors every function
here with the same signature and semantics.
"""

from itertools import combinations, islice

import numpy as np
import scipy.linalg

BACKEND = "python"

_RIC_BATCH = 4096


def top_k(v, k):
    """Indices of the ``k`` largest ``|v|``, ties to the smaller index, sorted."""
    a = np.abs(v)
    if not np.all(np.isfinite(a)):
        raise ValueError("top_k needs a finite vector")
    n = a.shape[0]
    if k >= n:
        return np.arange(n, dtype=np.int64)
    kth = np.partition(a, n - k)[n - k]
    above = np.flatnonzero(a > kth)
    ties = np.flatnonzero(a == kth)[: k - above.shape[0]]
    out = np.concatenate((above, ties)).astype(np.int64, copy=False)
    out.sort()
    return out


def hard_threshold(v, k):
    """Keep the ``k`` entries selected by :func:`top_k`; zero the rest."""
    idx = top_k(v, k)
    out = np.zeros_like(v)
    out[idx] = v[idx]
    return out, idx


def qr_solve(phi, y, support, rank_tol):
    """Pivoted-QR least squares on ``phi[:, support]``.

    Returns ``(coef, residual, rank, max|A^T r|, max column norm)``;
    ``coef`` and ``residual`` are ``None`` when the columns are rank
    deficient.
    """
    a = phi[:, support]
    k = a.shape[1]
    colmax = float(np.sqrt((a * a).sum(axis=0).max()))
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True,
                                check_finite=False)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > rank_tol * diag[0])) if diag[0] > 0 else 0
    if rank < k:
        return None, None, rank, 0.0, colmax
    coef = np.empty(k)
    coef[piv] = scipy.linalg.solve_triangular(r, q.T @ y, check_finite=False)
    resid = y - a @ coef
    return coef, resid, rank, float(np.abs(a.T @ resid).max()), colmax


def ric_extremes(gram, s):
    """Scan every size-``s`` principal submatrix of ``gram``.

    Returns ``(delta, support, lam_min, lam_max)`` where ``delta`` is the
    largest ``max(lam_max - 1, 1 - lam_min)`` over supports and ``support``
    is the lexicographically first support attaining it.
    """
    n = gram.shape[0]
    best = -np.inf
    best_support = None
    lo_all, hi_all = np.inf, -np.inf
    it = combinations(range(n), s)
    while True:
        chunk = list(islice(it, _RIC_BATCH))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=np.intp)
        sub = gram[idx[:, :, None], idx[:, None, :]]
        lam = np.linalg.eigvalsh(sub)
        lo, hi = lam[:, 0], lam[:, -1]
        dev = np.maximum(hi - 1.0, 1.0 - lo)
        j = int(np.argmax(dev))
        if dev[j] > best:
            best = float(dev[j])
            best_support = idx[j].copy()
        lo_all = min(lo_all, float(lo.min()))
        hi_all = max(hi_all, float(hi.max()))
    return best, np.asarray(best_support, dtype=np.int64), lo_all, hi_all


def admm_sweep(phi, proj, y, x, z, u, thresh, relax, n_iter):
    """Run ``n_iter`` over-relaxed ADMM steps for min |x|_1 s.t. phi x = y.

    ``proj`` is ``phi.T @ inv(phi @ phi.T)``.  ``x``, ``z`` and ``u`` are
    updated in place.
    """
    for _ in range(n_iter):
        v = z - u
        x[:] = v - proj @ (phi @ v - y)
        xh = relax * x + (1.0 - relax) * z
        w = xh + u
        z[:] = np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)
        u += xh - z
