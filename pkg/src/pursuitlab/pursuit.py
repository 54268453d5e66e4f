"""Greedy sparse-recovery algorithms.

Subspace thresholding pursuit (``stp``) and its large-sparsity variant
(``stpv2``), the IHT-identification variants of CoSaMP, HTP, SAMP and FBP,
and the classical comparison set: OMP, SP, CoSaMP, IHT, NIHT and HTP.
``l1`` dispatches to :func:`pursuitlab.l1.basis_pursuit`.

All algorithms start from ``x = 0`` with an empty support and share one
driver loop that applies the stopping rule after every iteration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ._backend import kernels
from .linalg import restricted_least_squares

ALGORITHMS = (
    "omp", "sp", "cosamp", "iht", "niht", "htp",
    "stp", "stpv2", "cosampv2", "htpv2", "sampv2", "fbpv2", "l1",
)

# parameters each algorithm actually reads, in display order
_MEANINGFUL = {
    "omp": (),
    "sp": (),
    "cosamp": ("alpha",),
    "iht": ("mu",),
    "niht": (),
    "htp": ("mu",),
    "stp": ("mu",),
    "stpv2": ("mu", "gamma"),
    "cosampv2": ("alpha", "mu"),
    "htpv2": ("alpha", "mu_prime", "mu"),
    "sampv2": ("nu0", "mu"),
    "fbpv2": ("nu", "chi", "mu"),
    "l1": (),
}
_HAS_IHT_SWITCH = ("cosampv2", "htpv2", "sampv2", "fbpv2")
_ALIASES = {"samp": "sampv2", "fbp": "fbpv2"}
_PARAM_ALIASES = {"iht": "iht_identification_enabled", "mup": "mu_prime", "mu'": "mu_prime"}

STOP_REASONS = ("residual", "max_iterations", "native_rule")

#: skip ahead once the iteration map revisits a state (results are unchanged)
CYCLE_FAST_FORWARD = True


@dataclass(frozen=True)
class AlgorithmSpec:
    """Algorithm identifier plus its tunable parameters.

    ``alpha`` defaults to 2 for the CoSaMP family and 1 for ``htpv2``;
    ``gamma`` defaults to 0.5 for ``stpv2``.  ``cosamp`` always runs with
    the IHT identification step disabled.
    """

    id: str
    mu: float = 1.0
    mu_prime: float = 1.0
    alpha: int | None = None
    gamma: float | None = None
    nu0: int = 2
    nu: int = 20
    chi: int = 18
    iht_identification_enabled: bool = True

    def __post_init__(self):
        if self.id not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.id!r}; choose from {', '.join(ALGORITHMS)}")
        if self.alpha is None:
            default = {"cosamp": 2, "cosampv2": 2, "htpv2": 1}.get(self.id)
            object.__setattr__(self, "alpha", default)
        if self.gamma is None and self.id == "stpv2":
            object.__setattr__(self, "gamma", 0.5)
        if self.id == "cosamp":
            object.__setattr__(self, "iht_identification_enabled", False)
        if not (self.mu >= 0 and self.mu_prime >= 0):
            raise ValueError("mu and mu_prime must be nonnegative")
        if self.alpha is not None:
            if int(self.alpha) != self.alpha or self.alpha < 0:
                raise ValueError("alpha must be a nonnegative integer")
            if self.id in ("cosamp", "cosampv2") and self.alpha < 1:
                raise ValueError("CoSaMP needs alpha >= 1")
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.nu0 < 1 or self.nu < 1 or self.chi < 0:
            raise ValueError("nu0 and nu must be positive, chi nonnegative")
        if self.chi >= self.nu:
            raise ValueError(f"chi ({self.chi}) must be smaller than nu ({self.nu})")

    def params(self) -> dict:
        """The parameters meaningful for this algorithm."""
        out = {k: getattr(self, k) for k in _MEANINGFUL[self.id]}
        if self.id in _HAS_IHT_SWITCH and not self.iht_identification_enabled:
            out["iht"] = 0
        return out

    @property
    def label(self) -> str:
        p = self.params()
        if not p:
            return self.id
        return self.id + ":" + ",".join(f"{k}={_fmt(v)}" for k, v in p.items())

    @classmethod
    def parse(cls, text: str) -> "AlgorithmSpec":
        """Parse ``name[:param=value[,param=value]]``."""
        name, _, rest = text.strip().partition(":")
        name = name.strip().lower()
        kwargs = {}
        if name in _ALIASES:
            name = _ALIASES[name]
            kwargs["iht_identification_enabled"] = False
        for item in filter(None, (t.strip() for t in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"expected param=value, got {item!r}")
            key = _PARAM_ALIASES.get(key.strip(), key.strip())
            kwargs[key] = _coerce(key, value.strip())
        return cls(name, **kwargs)


def parse_algorithm_list(text: str) -> list[AlgorithmSpec]:
    """Split ``"sp,htp,stp:mu=2.5,gamma=0.4,l1"`` into specs.

    A comma-separated token containing ``=`` but no ``:`` continues the
    parameter list of the preceding algorithm.
    """
    groups: list[str] = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if "=" in tok and ":" not in tok:
            if not groups:
                raise ValueError(f"parameter {tok!r} given before any algorithm")
            groups[-1] += "," + tok
        else:
            groups.append(tok)
    if not groups:
        raise ValueError("empty algorithm list")
    return [AlgorithmSpec.parse(g) for g in groups]


def _coerce(key: str, value: str):
    if key == "iht_identification_enabled":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean {value!r}")
    if key in ("alpha", "nu0", "nu", "chi"):
        return int(value)
    if key in ("mu", "mu_prime", "gamma"):
        return float(value)
    raise ValueError(f"unknown parameter {key!r}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


@dataclass(frozen=True)
class StoppingCriteria:
    max_iterations: int = 200
    residual_tolerance: float = 1e-10
    native_rule_enabled: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.residual_tolerance < 0:
            raise ValueError("residual_tolerance must be nonnegative")


def stopping_met(residual_norm: float, y_norm: float, iteration: int,
                 stop: StoppingCriteria, native_signal: bool = False) -> bool:
    return (residual_norm < stop.residual_tolerance * y_norm
            or iteration >= stop.max_iterations
            or (stop.native_rule_enabled and native_signal))


@dataclass
class Iterate:
    """State after one iteration, with the intermediate quantities."""

    x: np.ndarray
    support: np.ndarray
    residual_norm: float
    rank_deficient: bool = False
    stages: dict = field(default_factory=dict)
    extra: tuple = ()

    def key(self) -> bytes:
        return self.support.tobytes() + b"|" + self.x.tobytes() + repr(self.extra).encode()


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    support: tuple
    residual_norm: float
    ls_rank_deficient: bool

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "support": list(self.support),
                "residual_norm": self.residual_norm,
                "ls_rank_deficient": self.ls_rank_deficient}


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    support: np.ndarray
    iterations: int
    residual_history: list
    converged: bool
    stop_reason: str
    trace: list = field(default_factory=list)
    iterates: list | None = None
    #: worst ``max|phi_T^T r| / (|y| max col norm)`` over every LS solve
    ls_orthogonality: float = 0.0
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StpState:
    x_prev: np.ndarray
    s_prev: np.ndarray
    iteration: int = 0
    rank_deficient: bool = False


class _Problem:
    """Per-run context: data plus the LS bookkeeping."""

    def __init__(self, phi, y, s, spec):
        self.phi = np.ascontiguousarray(phi, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.m, self.n = self.phi.shape
        self.s = s
        self.spec = spec
        self.ortho = 0.0

    def ls(self, support):
        sol = restricted_least_squares(self.phi, self.y, support)
        if sol.orthogonality > self.ortho:
            self.ortho = sol.orthogonality
        return sol

    def residual(self, x):
        return self.y - self.phi @ x

    def grad(self, x):
        return self.phi.T @ (self.y - self.phi @ x)


def _norm(v) -> float:
    return math.sqrt(float(v @ v))


def _restrict(v, idx):
    out = np.zeros_like(v)
    out[idx] = v[idx]
    return out


def _iht_select(prob: _Problem, u, mu, k):
    w = u + mu * prob.grad(u)
    return kernels.top_k(w, k), w


def iht_identify(u, mu, phi, y, k) -> np.ndarray:
    """Top-``k`` indices of ``u + mu * phi^T (y - phi u)``."""
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if phi.shape != (y.shape[0], u.shape[0]):
        raise ValueError(f"dimension mismatch: phi {phi.shape}, y {y.shape}, u {u.shape}")
    if not 1 <= k <= u.shape[0]:
        raise ValueError(f"k must lie in [1, {u.shape[0]}]")
    w = u + mu * (phi.T @ (y - phi @ u))
    return kernels.top_k(w, int(k))


def stpv2_effective_width(s: int, gamma: float, m: int) -> int:
    """Identification width: ``s`` if ``s <= gamma m`` else ``ceil(2 gamma m) - s``."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    gm = gamma * m
    # absorb rounding in gamma * m, e.g. gamma = 288/300
    if s <= gm + 1e-9 * max(1.0, gm):
        return s
    width = math.ceil(2 * gm - 1e-9 * max(1.0, gm)) - s
    if width < 1:
        raise ValueError(f"s={s} leaves no identification width for gamma={gamma}, m={m}")
    return width


# -- steps ------------------------------------------------------------------
# Each step maps the previous Iterate to the next one.


def _omp_like_merge(prob: _Problem, prev: Iterate, k: int):
    k = min(k, prob.m - prev.support.shape[0])
    g = prob.grad(prev.x)
    delta = kernels.top_k(g, k)
    merged = np.union1d(prev.support, delta)
    return delta, merged


def _sp_step(prob: _Problem, prev: Iterate) -> Iterate:
    s = prob.s
    delta, merged = _omp_like_merge(prob, prev, s)
    first = prob.ls(merged)
    support = kernels.top_k(first.estimate, s)
    final = prob.ls(support)
    return Iterate(final.estimate, support, _norm(prob.residual(final.estimate)),
                   first.rank_deficient or final.rank_deficient,
                   {"delta": delta, "merged": merged, "x_tilde": first.estimate})


def _stp_core(prob: _Problem, prev: Iterate, k_identify: int, mu: float,
              iht: bool = True) -> Iterate:
    s = prob.s
    delta, merged = _omp_like_merge(prob, prev, k_identify)
    first = prob.ls(merged)
    pruned = kernels.top_k(first.estimate, s)
    u = _restrict(first.estimate, pruned)
    if iht:
        support, w = _iht_select(prob, u, mu, s)
    else:
        support, w = pruned, u
    final = prob.ls(support)
    return Iterate(final.estimate, support, _norm(prob.residual(final.estimate)),
                   first.rank_deficient or final.rank_deficient,
                   {"delta": delta, "merged": merged, "x_tilde": first.estimate,
                    "pruned": pruned, "u": u, "selection": w})


def _stp_step(prob, prev):
    return _stp_core(prob, prev, prob.s, prob.spec.mu)


def _stpv2_step(prob, prev):
    width = stpv2_effective_width(prob.s, prob.spec.gamma, prob.m)
    return _stp_core(prob, prev, width, prob.spec.mu)


def _cosamp_step(prob: _Problem, prev: Iterate) -> Iterate:
    s, spec = prob.s, prob.spec
    delta, merged = _omp_like_merge(prob, prev, spec.alpha * s)
    first = prob.ls(merged)
    pruned = kernels.top_k(first.estimate, s)
    u = _restrict(first.estimate, pruned)
    if spec.iht_identification_enabled:
        w = u + spec.mu * prob.grad(u)
        x, support = kernels.hard_threshold(w, s)
    else:
        x, support = u, pruned
    return Iterate(x, support, _norm(prob.residual(x)), first.rank_deficient,
                   {"delta": delta, "merged": merged, "x_tilde": first.estimate,
                    "pruned": pruned, "u": u})


def _htpv2_step(prob: _Problem, prev: Iterate) -> Iterate:
    s, spec = prob.s, prob.spec
    width = min((spec.alpha + 1) * s, prob.m)
    merged, _ = _iht_select(prob, prev.x, spec.mu_prime, width)
    first = prob.ls(merged)
    pruned = kernels.top_k(first.estimate, s)
    u = _restrict(first.estimate, pruned)
    if spec.iht_identification_enabled:
        support, _ = _iht_select(prob, u, spec.mu, s)
    else:
        support = pruned
    final = prob.ls(support)
    return Iterate(final.estimate, support, _norm(prob.residual(final.estimate)),
                   first.rank_deficient or final.rank_deficient,
                   {"merged": merged, "x_tilde": first.estimate, "pruned": pruned, "u": u})


def _htp_step(prob: _Problem, prev: Iterate) -> Iterate:
    support, _ = _iht_select(prob, prev.x, prob.spec.mu, prob.s)
    final = prob.ls(support)
    return Iterate(final.estimate, support, _norm(prob.residual(final.estimate)),
                   final.rank_deficient)


def _iht_step(prob: _Problem, prev: Iterate) -> Iterate:
    w = prev.x + prob.spec.mu * prob.grad(prev.x)
    x, support = kernels.hard_threshold(w, prob.s)
    return Iterate(x, support, _norm(prob.residual(x)))


def _niht_step(prob: _Problem, prev: Iterate) -> Iterate:
    g = prob.grad(prev.x)
    cur = prev.support if prev.support.shape[0] else kernels.top_k(g, prob.s)
    gs = g[cur]
    num = float(gs @ gs)
    pg = prob.phi[:, cur] @ gs
    den = float(pg @ pg)
    if num == 0.0 or den == 0.0:
        # residual already orthogonal to the support: exact line search on g
        pg = prob.phi @ g
        num, den = float(g @ g), float(pg @ pg)
    step = num / den if den > 0 else 1.0
    x, support = kernels.hard_threshold(prev.x + step * g, prob.s)
    return Iterate(x, support, _norm(prob.residual(x)), stages={"step": step})


def _sampv2_step(prob: _Problem, prev: Iterate) -> Iterate:
    spec = prob.spec
    nu = prev.extra[0]
    delta, merged = _omp_like_merge(prob, prev, nu)
    first = prob.ls(merged)
    pruned = kernels.top_k(first.estimate, nu)
    u = _restrict(first.estimate, pruned)
    if spec.iht_identification_enabled:
        cand, _ = _iht_select(prob, u, spec.mu, nu)
    else:
        cand = pruned
    trial = prob.ls(cand)
    trial_norm = _norm(prob.residual(trial.estimate))
    stages = {"delta": delta, "merged": merged, "x_tilde": first.estimate,
              "pruned": pruned, "u": u, "candidate": cand, "candidate_residual": trial_norm}
    rd = first.rank_deficient or trial.rank_deficient
    if trial_norm >= prev.residual_norm:
        # reject the candidate and enlarge the stage
        grown = min(nu + spec.nu0, prob.m // 2)
        stages["committed"] = False
        return Iterate(prev.x, prev.support, prev.residual_norm, rd, stages, (grown,))
    stages["committed"] = True
    return Iterate(trial.estimate, cand, trial_norm, rd, stages, (nu,))


def _fbpv2_step(prob: _Problem, prev: Iterate) -> Iterate:
    spec = prob.spec
    # forward step adds nu atoms outside the current support, so exact ties
    # (zero correlations on an orthonormal Phi) cannot stall the growth
    outside = np.setdiff1d(np.arange(prob.n), prev.support)
    k = min(spec.nu, prob.m - prev.support.shape[0], outside.shape[0])
    delta = outside[kernels.top_k(prob.grad(prev.x)[outside], k)]
    merged = np.union1d(prev.support, delta)
    first = prob.ls(merged)
    size = max(1, min(merged.shape[0] - spec.chi, prob.m - 1))
    pruned = kernels.top_k(first.estimate, size)
    u = _restrict(first.estimate, pruned)
    if spec.iht_identification_enabled:
        support, _ = _iht_select(prob, u, spec.mu, size)
    else:
        support = pruned
    final = prob.ls(support)
    return Iterate(final.estimate, support, _norm(prob.residual(final.estimate)),
                   first.rank_deficient or final.rank_deficient,
                   {"delta": delta, "merged": merged, "x_tilde": first.estimate,
                    "pruned": pruned, "u": u})


def _residual_rise(prev: Iterate, cur: Iterate) -> bool:
    return cur.residual_norm >= prev.residual_norm


def _support_fixed(prev: Iterate, cur: Iterate) -> bool:
    return np.array_equal(prev.support, cur.support)


_STEPS: dict[str, tuple[Callable, Callable]] = {
    "sp": (_sp_step, _residual_rise),
    "stp": (_stp_step, _residual_rise),
    "stpv2": (_stpv2_step, _residual_rise),
    "cosamp": (_cosamp_step, _residual_rise),
    "cosampv2": (_cosamp_step, _residual_rise),
    "sampv2": (_sampv2_step, _residual_rise),
    "fbpv2": (_fbpv2_step, _residual_rise),
    "htp": (_htp_step, _support_fixed),
    "htpv2": (_htpv2_step, _support_fixed),
    "iht": (_iht_step, _support_fixed),
    "niht": (_niht_step, _support_fixed),
}


def stp_iterate(state: StpState, spec: AlgorithmSpec, inst, s: int,
                k_identify: int) -> StpState:
    """One pass of the seven STP steps with identification width ``k_identify``."""
    if k_identify < 1:
        raise ValueError("k_identify must be >= 1")
    if state.s_prev.shape[0] > s:
        raise ValueError("previous support larger than s")
    prob = _Problem(inst.phi, inst.y, s, spec)
    prev = Iterate(np.asarray(state.x_prev, dtype=np.float64),
                   np.asarray(state.s_prev, dtype=np.int64), 0.0)
    cur = _stp_core(prob, prev, k_identify, spec.mu, spec.iht_identification_enabled)
    return StpState(cur.x, cur.support, state.iteration + 1, cur.rank_deficient)


# -- driver -----------------------------------------------------------------


def _record(it: int, cur: Iterate) -> TraceRecord:
    return TraceRecord(it, tuple(int(i) for i in cur.support), cur.residual_norm,
                       cur.rank_deficient)


def _finish(states, n, reason, tol, y_norm, record, prob, info=None) -> RecoveryResult:
    final = states[n]
    hist = [states[i].residual_norm for i in range(1, n + 1)]
    trace = [_record(i, states[i]) for i in range(1, n + 1)]
    return RecoveryResult(
        estimate=final.x, support=final.support, iterations=n, residual_history=hist,
        converged=final.residual_norm < tol * y_norm, stop_reason=reason, trace=trace,
        iterates=states[1:n + 1] if record else None, ls_orthogonality=prob.ortho,
        info=info or {})


def _run_loop(prob: _Problem, step, native, stop: StoppingCriteria, record: bool,
              extra0: tuple = ()) -> RecoveryResult:
    y_norm = _norm(prob.y)
    tol = stop.residual_tolerance
    states = [Iterate(np.zeros(prob.n), np.zeros(0, dtype=np.int64), y_norm, extra=extra0)]
    seen = {states[0].key(): 0}
    n = 0
    while True:
        n += 1
        prev = states[-1]
        cur = step(prob, prev)
        states.append(cur)
        if not math.isfinite(cur.residual_norm):
            # overflowed (e.g. IHT with too large a step): nothing can follow
            states.extend([cur] * (stop.max_iterations - n))
            return _finish(states, stop.max_iterations, "max_iterations", tol, y_norm,
                           record, prob, {"diverged_at": n})
        signal = native(prev, cur) if stop.native_rule_enabled else False
        if stopping_met(cur.residual_norm, y_norm, n, stop, signal):
            if cur.residual_norm < tol * y_norm:
                reason = "residual"
            elif stop.native_rule_enabled and signal:
                reason = "native_rule"
            else:
                reason = "max_iterations"
            return _finish(states, n, reason, tol, y_norm, record, prob)
        if not CYCLE_FAST_FORWARD:
            continue
        key = cur.key()
        j = seen.get(key)
        if j is not None:
            # deterministic map revisited a state: the rest of the run is
            # periodic and cannot meet the residual or native rule.  Replay
            # iterates j+1..n, whose predecessors all lie on the cycle.
            period = n - j
            for i in range(n + 1, stop.max_iterations + 1):
                states.append(states[j + 1 + (i - n - 1) % period])
            return _finish(states, stop.max_iterations, "max_iterations", tol, y_norm,
                           record, prob, {"cycle_start": j, "cycle_period": period})
        seen[key] = n


def _run_omp(prob: _Problem, stop: StoppingCriteria, record: bool) -> RecoveryResult:
    y_norm = _norm(prob.y)
    tol = stop.residual_tolerance
    states = [Iterate(np.zeros(prob.n), np.zeros(0, dtype=np.int64), y_norm)]
    limit = min(prob.s, stop.max_iterations)
    n = 0
    reason = "native_rule"
    while n < limit:
        n += 1
        prev = states[-1]
        g = prob.grad(prev.x)
        pick = kernels.top_k(g, 1)
        support = np.union1d(prev.support, pick)
        sol = prob.ls(support)
        states.append(Iterate(sol.estimate, support, _norm(prob.residual(sol.estimate)),
                              sol.rank_deficient, {"pick": int(pick[0])}))
        if states[-1].residual_norm < tol * y_norm:
            reason = "residual"
            break
    else:
        if limit < prob.s:
            reason = "max_iterations"
    return _finish(states, n, reason, tol, y_norm, record, prob)


def run_algorithm(spec: AlgorithmSpec, inst, s: int,
                  stop: StoppingCriteria | None = None,
                  record_iterates: bool = False, l1_config=None) -> RecoveryResult:
    """Recover a sparse vector from ``inst.phi`` and ``inst.y``.

    Parameters
    ----------
    spec : AlgorithmSpec
    inst : MeasurementInstance
        Anything with ``phi`` and ``y`` attributes works.
    s : int
        Target sparsity (stage sizes for ``sampv2``/``fbpv2`` ignore it).
    stop : StoppingCriteria, optional
        Defaults to 200 iterations or relative residual below 1e-10.
    record_iterates : bool
        Keep every :class:`Iterate`, including intermediate quantities,
        in ``result.iterates``.
    """
    stop = stop or StoppingCriteria()
    phi = np.ascontiguousarray(inst.phi, dtype=np.float64)
    y = np.ascontiguousarray(inst.y, dtype=np.float64)
    m, n = phi.shape
    if y.shape != (m,):
        raise ValueError(f"y has shape {y.shape}, expected ({m},)")
    if spec.id == "l1":
        from .l1 import L1Config, basis_pursuit

        x, info = basis_pursuit(phi, y, l1_config or L1Config(), full_output=True)
        r = _norm(y - phi @ x)
        yn = _norm(y)
        return RecoveryResult(x, np.flatnonzero(x).astype(np.int64), info.iterations,
                              list(info.residual_history), r <= stop.residual_tolerance * yn
                              or info.converged, "residual" if info.converged else "max_iterations",
                              ls_orthogonality=info.ls_orthogonality,
                              info={"certified": info.converged, "gap": info.gap})
    s = int(s)
    if not 1 <= s <= m:
        raise ValueError(f"sparsity s={s} must lie in [1, m={m}]")
    if spec.id == "stpv2":
        stpv2_effective_width(s, spec.gamma, m)
        if spec.gamma * m < 1:
            raise ValueError("stpv2 needs gamma * m >= 1")
    with np.errstate(over="ignore", invalid="ignore"):
        return _run_greedy(spec, phi, y, s, stop, record_iterates)


def _run_greedy(spec, phi, y, s, stop, record_iterates) -> RecoveryResult:
    m, n = phi.shape
    prob = _Problem(phi, y, s, spec)
    if _norm(y) == 0.0:
        zero = Iterate(np.zeros(n), np.zeros(0, dtype=np.int64), 0.0)
        return _finish([zero], 0, "residual", 1.0, 1.0, record_iterates, prob)
    if spec.id == "omp":
        return _run_omp(prob, stop, record_iterates)
    step, native = _STEPS[spec.id]
    extra0 = (min(spec.nu0, m // 2),) if spec.id == "sampv2" else ()
    return _run_loop(prob, step, native, stop, record_iterates, extra0)


def with_params(spec: AlgorithmSpec, **changes) -> AlgorithmSpec:
    return replace(spec, **changes)


def write_trace(result: RecoveryResult, path) -> None:
    """One JSON object per iteration: iteration, support, residual_norm, ls_rank_deficient."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in result.trace:
            fh.write(json.dumps(rec.to_dict()) + "\n")
