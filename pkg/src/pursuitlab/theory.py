"""Convergence theory for STP and exact restricted isometry constants.

``rho`` and ``tau`` are the contraction factor and noise amplification of
the STP error recursion ``|x - x^n| <= rho^n |x| + tau |e|``; they depend
on the step ``mu`` and the RIC ``delta_{3s}``.  ``exact_ric`` enumerates
supports, so it is for small matrices only.  The ``check_lemma`` family
evaluates both sides of the RIP inequalities behind that recursion on
actual STP iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from ._backend import kernels
from .problems import RngStream, SparseSignal, random_support
from .pursuit import AlgorithmSpec, StoppingCriteria, run_algorithm

ENUMERATION_CAP = 10**6
#: rho(1, delta) = 1 at this delta (to the printed precision)
DELTA_MAX_MU1 = 0.5340

LEMMAS = ("L1_monotonicity", "L1_rip_products", "L2_noise", "L4_orthogonality",
          "L5_sp_identification", "L6_iht_identification")


@dataclass(frozen=True)
class RicReport:
    order: int
    delta: float
    argmax_support: np.ndarray
    method: str
    lam_min: float = 0.0
    lam_max: float = 0.0
    supports_examined: int = 0

    def to_dict(self) -> dict:
        return {"order": self.order, "delta": self.delta,
                "argmax_support": [int(i) for i in self.argmax_support],
                "method": self.method, "lam_min": self.lam_min, "lam_max": self.lam_max,
                "supports_examined": self.supports_examined}


def exact_ric(phi, s: int, method: str = "exhaustive", samples: int = 100_000,
              rng: RngStream | None = None, cap: int = ENUMERATION_CAP) -> RicReport:
    """Restricted isometry constant of order ``s``.

    ``delta_s = max_T max(lam_max(G_T) - 1, 1 - lam_min(G_T))`` over
    ``|T| = s`` with ``G_T = phi_T^T phi_T``.  The value is not clipped to
    [0, 1]: a matrix with large columns can exceed 1.  ``method="sampled"``
    examines ``samples`` random supports and yields a lower bound.
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    m, n = phi.shape
    s = int(s)
    if not 1 <= s <= min(m, n):
        raise ValueError(f"order s={s} must lie in [1, min(m, n)={min(m, n)}]")
    gram = np.ascontiguousarray(phi.T @ phi)
    total = comb(n, s)
    if method == "exhaustive":
        if total > cap:
            raise ValueError(f"C({n},{s}) = {total} supports exceeds the cap {cap}; use method='sampled'")
        delta, support, lo, hi = kernels.ric_extremes(gram, s)
        return RicReport(s, float(delta), support, "exhaustive", lo, hi, total)
    if method != "sampled":
        raise ValueError(f"unknown method {method!r}")
    rng = rng or RngStream(0)
    idx = np.stack([random_support(n, s, rng.child(i)) for i in range(samples)])
    lam = np.linalg.eigvalsh(gram[idx[:, :, None], idx[:, None, :]])
    dev = np.maximum(lam[:, -1] - 1.0, 1.0 - lam[:, 0])
    j = int(np.argmax(dev))
    return RicReport(s, float(dev[j]), idx[j].astype(np.int64), "sampled",
                     float(lam[:, 0].min()), float(lam[:, -1].max()), samples)


def ric_profile(phi, max_order: int) -> dict[int, float]:
    """Exact ``delta_1 .. delta_max_order``."""
    return {k: exact_ric(phi, k).delta for k in range(1, max_order + 1)}


# -- constants ----------------------------------------------------------------


def _check_mu(mu: float):
    if not mu >= 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")


def _check_delta(delta: float):
    if not 0 <= delta < 1:
        raise ValueError(f"delta3s must lie in [0, 1), got {delta}")


def rho(mu: float, delta3s: float) -> float:
    """Contraction factor ``2 d (|mu-1| + mu d) sqrt(1 + 2 d^2) / (1 - d^2)``."""
    _check_mu(mu)
    _check_delta(delta3s)
    d = delta3s
    return 2 * d * (abs(mu - 1) + mu * d) * math.sqrt(1 + 2 * d * d) / (1 - d * d)


def tau_numerator(mu: float, delta3s: float) -> float:
    """``(1 - rho) * tau``: the noise term of one STP iteration."""
    _check_mu(mu)
    _check_delta(delta3s)
    d = delta3s
    c = abs(mu - 1) + mu * d
    first = math.sqrt(2 + math.sqrt(2)) * d * c / math.sqrt(1 - d * d) + 1
    second = (math.sqrt(2 * (1 - d)) + math.sqrt(1 + d)) / (1 - d)
    return first * second + math.sqrt(4 + math.sqrt(2)) * c / math.sqrt(1 - d)


def tau(mu: float, delta3s: float) -> float:
    r = rho(mu, delta3s)
    if r >= 1:
        raise ValueError(f"rho({mu}, {delta3s}) = {r:.6g} >= 1, tau undefined")
    return tau_numerator(mu, delta3s) / (1 - r)


Interval = tuple[float, float] | None


def mu_bounds(delta3s: float) -> tuple[float, float]:
    """Raw endpoints: ``rho < 1`` iff ``lower < mu < upper`` (for mu != 1)."""
    d = delta3s
    k = 2 * d * math.sqrt(1 + 2 * d * d)
    return 1 / (1 - d) - (1 + d) / k, 1 / (1 + d) + (1 - d) / k


def mu_admissible_range(delta3s: float) -> tuple[Interval, Interval]:
    """Sub-unity and super-unity intervals of ``mu`` with ``rho < 1``.

    An empty interval is ``None``.  ``mu = 1`` itself is admissible iff
    both intervals are non-empty.
    """
    if not 0 < delta3s < 1:
        raise ValueError(f"delta3s must lie in (0, 1), got {delta3s}")
    lower, upper = mu_bounds(delta3s)
    below = (max(0.0, lower), 1.0) if lower < 1 else None
    above = (1.0, upper) if upper > 1 else None
    return below, above


def mu_one_admissible(delta3s: float) -> bool:
    return rho(1.0, delta3s) < 1


def delta_max(mu: float, iterations: int = 60) -> float:
    """Largest ``delta`` with ``rho(mu, delta) < 1`` (bisection)."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    lo, hi = 0.0, 1.0 - 1e-9
    if rho(mu, lo) >= 1:
        return 0.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if rho(mu, mid) < 1:
            lo = mid
        else:
            hi = mid
    return lo


def delta_max_curve(mus) -> list[tuple[float, float]]:
    return [(float(mu), delta_max(mu)) for mu in mus]


@dataclass(frozen=True)
class ConvergenceConstants:
    mu: float
    delta3s: float
    rho: float
    tau: float | None

    @classmethod
    def evaluate(cls, mu: float, delta3s: float) -> "ConvergenceConstants":
        r = rho(mu, delta3s)
        return cls(mu, delta3s, r, tau(mu, delta3s) if r < 1 else None)


def iteration_bound_terms(x, rho_value: float) -> tuple[int, int]:
    """The two ceilings ``ln(|x|/xi)/ln(1/rho)`` and ``1.5 s/ln(1/rho)``."""
    if not 0 < rho_value < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho_value}")
    if not isinstance(x, SparseSignal):
        x = SparseSignal.from_vector(x)
    if x.sparsity == 0:
        raise ValueError("x must be nonzero")
    vals = x.values[x.support]
    ratio = math.sqrt(float(vals @ vals)) / float(np.abs(vals).min())
    scale = math.log(1 / rho_value)
    # ratio >= 1 always; clamp the rounding when it is exactly one spike
    first = math.ceil(max(0.0, math.log(ratio)) / scale)
    second = math.ceil(1.5 * x.sparsity / scale)
    return first, second


def iteration_bound(x, rho_value: float) -> int:
    """Iterations sufficient for STP to recover ``x``, floored at 1."""
    return max(1, min(iteration_bound_terms(x, rho_value)))


# -- lemma oracles --------------------------------------------------------------


@dataclass(frozen=True)
class LemmaCheck:
    lemma_id: str
    lhs: float
    rhs: float
    part: int = 1
    applicable: bool = True
    iteration: int = 0

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs if self.applicable else math.inf

    def holds(self, tol: float = 1e-9) -> bool:
        return self.slack >= -tol


def _n(v) -> float:
    return float(np.linalg.norm(v))


def _delta(deltas: dict, k: int) -> float:
    if k <= 0:
        return 0.0
    if k not in deltas:
        raise ValueError(f"RIC of order {k} not supplied")
    return deltas[k]


def check_lemma(lemma_id: str, part: int = 1, **d) -> LemmaCheck:
    """Evaluate one inequality.

    Keyword data per lemma:

    * ``L1_monotonicity``: ``deltas`` (dict order -> RIC); checks the worst
      consecutive pair.
    * ``L1_rip_products``: ``phi, u, v, mu, deltas``; part 1 is the inner
      product bound, part 2 the restricted bound and also needs ``U``.
    * ``L2_noise``: ``phi, e, U, deltas``.
    * ``L4_orthogonality``: ``phi, x, e, T, z, s, deltas``; parts 1-3.
    * ``L5_sp_identification``: ``x, x_prev, merged, e, deltas, s``.
    * ``L6_iht_identification``: ``x, u, support, e, mu, deltas, s``.
    """
    it = d.get("iteration", 0)
    if lemma_id == "L1_monotonicity":
        deltas = d["deltas"]
        orders = sorted(deltas)
        if len(orders) < 2:
            raise ValueError("need at least two orders")
        pairs = list(zip(orders, orders[1:]))
        a, b = min(pairs, key=lambda p: deltas[p[1]] - deltas[p[0]])
        return LemmaCheck(lemma_id, deltas[a], deltas[b], 1, True, it)

    if lemma_id == "L1_rip_products":
        phi, u, v, mu, deltas = d["phi"], d["u"], d["v"], d["mu"], d["deltas"]
        _check_mu(mu)
        v_apply = v - mu * (phi.T @ (phi @ v))
        supp_v = set(np.flatnonzero(v))
        if part == 1:
            t = len(supp_v | set(np.flatnonzero(u)))
            lhs = abs(float(u @ v_apply))
            rhs = (abs(mu - 1) + mu * _delta(deltas, t)) * _n(u) * _n(v)
        else:
            U = np.asarray(d["U"], dtype=np.int64)
            t = len(supp_v | set(U.tolist()))
            lhs = _n(v_apply[U])
            rhs = (abs(mu - 1) + mu * _delta(deltas, t)) * _n(v)
        return LemmaCheck(lemma_id, lhs, rhs, part, True, it)

    if lemma_id == "L2_noise":
        phi, e, U, deltas = d["phi"], d["e"], np.asarray(d["U"], dtype=np.int64), d["deltas"]
        lhs = _n((phi.T @ e)[U])
        rhs = math.sqrt(1 + _delta(deltas, U.shape[0])) * _n(e)
        return LemmaCheck(lemma_id, lhs, rhs, 1, True, it)

    if lemma_id == "L4_orthogonality":
        x, e, z, deltas, s = d["x"], d["e"], d["z"], d["deltas"], d["s"]
        T = np.asarray(d["T"], dtype=np.int64)
        t = T.shape[0]
        dst, dt = _delta(deltas, s + t), _delta(deltas, t)
        diff = x - z
        ne = _n(e)
        if part == 1:
            return LemmaCheck(lemma_id, _n(diff[T]), dst * _n(diff) + math.sqrt(1 + dt) * ne,
                              1, True, it)
        if part == 2:
            if dst >= 1:
                return LemmaCheck(lemma_id, math.nan, math.nan, 2, False, it)
            outside = np.ones(x.shape[0], dtype=bool)
            outside[T] = False
            rhs = math.sqrt(1 / (1 - dst * dst)) * _n(x[outside]) + math.sqrt(1 + dt) / (1 - dst) * ne
            return LemmaCheck(lemma_id, _n(diff), rhs, 2, True, it)
        if t <= s:
            return LemmaCheck(lemma_id, math.nan, math.nan, 3, False, it)
        # the t - s smallest magnitudes of z on T, ties to the larger index
        order = np.lexsort((-T, np.abs(z[T])))
        small = T[order[: t - s]]
        rhs = math.sqrt(2) * dst * _n(diff) + math.sqrt(2 * (1 + dt)) * ne
        return LemmaCheck(lemma_id, _n(x[small]), rhs, 3, True, it)

    if lemma_id == "L5_sp_identification":
        x, x_prev, e, deltas, s = d["x"], d["x_prev"], d["e"], d["deltas"], d["s"]
        outside = np.ones(x.shape[0], dtype=bool)
        outside[np.asarray(d["merged"], dtype=np.int64)] = False
        rhs = (math.sqrt(2) * _delta(deltas, 3 * s) * _n(x - x_prev)
               + math.sqrt(2 * (1 + _delta(deltas, 2 * s))) * _n(e))
        return LemmaCheck(lemma_id, _n(x[outside]), rhs, 1, True, it)

    if lemma_id == "L6_iht_identification":
        x, u, e, mu, deltas, s = d["x"], d["u"], d["e"], d["mu"], d["deltas"], d["s"]
        _check_mu(mu)
        outside = np.ones(x.shape[0], dtype=bool)
        outside[np.asarray(d["support"], dtype=np.int64)] = False
        rhs = (math.sqrt(2) * (abs(mu - 1) + mu * _delta(deltas, 3 * s)) * _n(x - u)
               + math.sqrt(2 * (1 + _delta(deltas, 2 * s))) * mu * _n(e))
        return LemmaCheck(lemma_id, _n(x[outside]), rhs, 1, True, it)

    raise ValueError(f"unknown lemma {lemma_id!r}; choose from {', '.join(LEMMAS)}")


def stp_lemma_checks(inst, s: int, mu: float, deltas: dict | None = None,
                     max_iterations: int = 10) -> list[LemmaCheck]:
    """Run STP on ``inst`` and check every lemma on each iteration.

    ``inst.truth`` must be present; ``e`` is taken as ``y - phi x`` so it
    also absorbs any model mismatch.  ``deltas`` defaults to the exact
    RICs of orders 1..3s.
    """
    if inst.truth is None:
        raise ValueError("lemma checks need the true signal")
    phi = np.ascontiguousarray(inst.phi, dtype=np.float64)
    if deltas is None:
        deltas = ric_profile(phi, min(3 * s, phi.shape[0], phi.shape[1]))
    x = inst.truth.values
    e = inst.y - phi @ x
    res = run_algorithm(AlgorithmSpec("stp", mu=mu), inst, s,
                        StoppingCriteria(max_iterations=max_iterations), record_iterates=True)
    out = [check_lemma("L1_monotonicity", deltas=deltas)]
    x_prev = np.zeros_like(x)
    for n, cur in enumerate(res.iterates, start=1):
        st = cur.stages
        merged, x_tilde, u = st["merged"], st["x_tilde"], st["u"]
        common = dict(iteration=n, deltas=deltas, s=s, e=e, x=x)
        out.append(check_lemma("L5_sp_identification", x_prev=x_prev, merged=merged, **common))
        out.append(check_lemma("L6_iht_identification", u=u, support=cur.support, mu=mu, **common))
        for part in (1, 2, 3):
            out.append(check_lemma("L4_orthogonality", part, phi=phi, T=merged, z=x_tilde, **common))
        for part in (1, 2):
            out.append(check_lemma("L4_orthogonality", part, phi=phi, T=cur.support, z=cur.x, **common))
        out.append(check_lemma("L2_noise", phi=phi, e=e, U=merged, deltas=deltas, iteration=n))
        out.append(check_lemma("L1_rip_products", 1, phi=phi, u=x - x_tilde, v=x - u, mu=mu,
                               deltas=deltas, iteration=n))
        U = np.union1d(cur.support, inst.truth.support)
        out.append(check_lemma("L1_rip_products", 2, phi=phi, u=x - x_tilde, v=x - u, U=U,
                               mu=mu, deltas=deltas, iteration=n))
        x_prev = cur.x
    return out
