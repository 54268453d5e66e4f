"""Basis pursuit: ``min |x|_1  s.t.  phi x = y``.

Solved by over-relaxed ADMM on the split ``x = z`` with ``x`` confined to
the affine set ``{phi x = y}``.  Every ``check_every`` sweeps the current
``supp(z)`` is debiased by least squares and a dual point is built from the
ADMM multiplier; a small primal-dual gap certifies the debiased vector as
optimal and ends the solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._backend import kernels
from .linalg import as_matrix, restricted_least_squares

#: entries below this fraction of ``max|z|`` are dropped before debiasing
SUPPORT_THRESHOLD = 1e-8


@dataclass(frozen=True)
class L1Config:
    tolerance: float = 1e-8
    max_iterations: int = 5000
    #: soft-threshold level relative to ``|y|``, i.e. the inverse penalty
    threshold: float = 0.2
    relaxation: float = 1.6
    check_every: int = 25

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1 or self.check_every < 1:
            raise ValueError("iteration counts must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")


@dataclass
class L1Info:
    iterations: int
    converged: bool
    gap: float
    feasibility: float
    residual_history: list = field(default_factory=list)
    ls_orthogonality: float = 0.0


def _certificate(phi, gram_solve, y, z, u, thresh):
    """Debias on ``supp(z)`` and bound the gap with a dual-feasible point.

    Works on the normalised problem (``|y| = 1``).  Returns
    ``(x, gap, feasibility, orthogonality)`` or ``None`` when the support
    is unusable.
    """
    m = phi.shape[0]
    zmax = float(np.abs(z).max())
    if zmax == 0.0:
        return None
    support = np.flatnonzero(np.abs(z) > SUPPORT_THRESHOLD * zmax)
    if support.shape[0] > m:
        return None
    sol = restricted_least_squares(phi, y, support)
    if sol.rank_deficient:
        return None
    x = sol.estimate
    xs = x[support]
    keep = xs != 0
    if not keep.all():
        return None
    # multiplier estimate: u / thresh lies in the subdifferential at optimum
    lam = gram_solve(phi @ (u / thresh))
    a = phi[:, support]
    sign = np.sign(xs)
    mismatch = sign - a.T @ lam
    corr, *_ = scipy.linalg.lstsq(a.T, mismatch, check_finite=False, lapack_driver="gelsy")
    lam = lam + corr
    scale = max(1.0, float(np.abs(phi.T @ lam).max()))
    lam /= scale
    l1 = float(np.abs(xs).sum())
    gap = l1 - float(y @ lam)
    return x, gap, sol.residual_norm, sol.orthogonality


def basis_pursuit(phi, y, cfg: L1Config | None = None, full_output: bool = False):
    """Minimum-ℓ1 solution of ``phi x = y``.

    Returns the estimate, or ``(estimate, L1Info)`` with ``full_output``.
    When no certificate is reached within ``cfg.max_iterations`` the best
    available point is returned with ``info.converged = False``.
    """
    cfg = cfg or L1Config()
    phi = as_matrix(phi)
    y = np.ascontiguousarray(y, dtype=np.float64)
    m, n = phi.shape
    if y.shape != (m,):
        raise ValueError(f"y has shape {y.shape}, expected ({m},)")
    if m > n:
        raise ValueError("basis pursuit needs m <= n")
    y_norm = math.sqrt(float(y @ y))
    if y_norm == 0.0:
        info = L1Info(0, True, 0.0, 0.0)
        return (np.zeros(n), info) if full_output else np.zeros(n)

    chol = scipy.linalg.cho_factor(phi @ phi.T, check_finite=False)

    def gram_solve(b):
        return scipy.linalg.cho_solve(chol, b, check_finite=False)

    proj = np.ascontiguousarray(scipy.linalg.cho_solve(chol, phi, check_finite=False).T)
    yn = y / y_norm
    x = proj @ yn  # least-norm feasible point
    z = x.copy()
    u = np.zeros(n)
    thresh = cfg.threshold
    done = 0
    history = []
    best = None
    ortho = 0.0
    while done < cfg.max_iterations:
        sweep = min(cfg.check_every, cfg.max_iterations - done)
        kernels.admm_sweep(phi, proj, yn, x, z, u, thresh, cfg.relaxation, sweep)
        done += sweep
        history.append(float(np.linalg.norm(x - z)))
        cert = _certificate(phi, gram_solve, yn, z, u, thresh)
        if cert is None:
            continue
        xc, gap, feas, orth = cert
        ortho = max(ortho, orth)
        l1 = float(np.abs(xc).sum())
        if best is None or gap < best[1]:
            best = (xc, gap, feas)
        if feas <= cfg.tolerance and gap <= cfg.tolerance * (1.0 + l1):
            info = L1Info(done, True, gap, feas, history, ortho)
            return (xc * y_norm, info) if full_output else xc * y_norm

    if best is not None and best[2] <= cfg.tolerance:
        out, gap, feas = best
    else:
        out = x
        gap, feas = math.inf, float(np.linalg.norm(phi @ x - yn))
    info = L1Info(done, False, gap, feas, history, ortho)
    return (out * y_norm, info) if full_output else out * y_norm
