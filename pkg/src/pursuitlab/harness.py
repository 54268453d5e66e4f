"""Monte-Carlo exact-reconstruction experiments.

Trial ``t`` at sparsity ``s`` always uses the instance built from
``RngStream(master_seed, (s << 32) | t)``, and every algorithm in the plan
sees that same instance.  Rates are therefore a pure function of the plan,
independent of worker count, scheduling and algorithm order.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .l1 import L1Config
from .problems import RngStream, build_instance
from .pursuit import AlgorithmSpec, StoppingCriteria, parse_algorithm_list, run_algorithm

log = logging.getLogger(__name__)

CSV_COLUMNS = ("algorithm", "mu", "params", "s", "trials", "successes", "rate",
               "mean_iterations", "mean_wall_ms")


def stream_id(s: int, trial: int) -> int:
    return (int(s) << 32) | int(trial)


def default_workers() -> int:
    env = os.environ.get("PURSUITLAB_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentPlan:
    m: int
    n: int
    signal_kind: str
    sweep: tuple
    trials: int
    algorithms: tuple
    stop: StoppingCriteria = StoppingCriteria()
    master_seed: int = 0
    success_tolerance: float = 1e-6
    noise_level: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "sweep", tuple(int(s) for s in self.sweep))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not 0 < self.m < self.n:
            raise ValueError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.signal_kind not in ("gaussian", "cars"):
            raise ValueError(f"signal_kind must be gaussian or cars, got {self.signal_kind!r}")
        if not self.sweep:
            raise ValueError("sweep must not be empty")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            raise ValueError("sweep must be strictly increasing")
        if self.sweep[0] < 1:
            raise ValueError("sparsity values must be >= 1")
        if self.sweep[-1] >= self.m:
            raise ValueError(f"max sparsity {self.sweep[-1]} must be smaller than m={self.m}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if not self.success_tolerance > 0:
            raise ValueError("success_tolerance must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @classmethod
    def from_range(cls, smin: int, smax: int, step: int = 1, **kw) -> "ExperimentPlan":
        if step < 1:
            raise ValueError("step must be >= 1")
        if smax < smin:
            raise ValueError(f"smax ({smax}) must be >= smin ({smin})")
        return cls(sweep=tuple(range(smin, smax + 1, step)), **kw)

    def to_dict(self) -> dict:
        return {
            "m": self.m, "n": self.n, "signal_kind": self.signal_kind,
            "sweep": list(self.sweep), "trials": self.trials,
            "algorithms": [a.label for a in self.algorithms],
            "stop": {"max_iterations": self.stop.max_iterations,
                     "residual_tolerance": self.stop.residual_tolerance,
                     "native_rule_enabled": self.stop.native_rule_enabled},
            "master_seed": self.master_seed, "success_tolerance": self.success_tolerance,
            "noise_level": self.noise_level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        algos = d.pop("algorithms")
        if isinstance(algos, str):
            algos = parse_algorithm_list(algos)
        else:
            algos = [AlgorithmSpec.parse(a) for a in algos]
        stop = StoppingCriteria(**d.pop("stop", {}))
        return cls(algorithms=tuple(algos), stop=stop, **d)


@dataclass
class RatePoint:
    s: int
    successes: int
    trials: int
    rate: float
    mean_iterations: float
    mean_wall_ms: float
    max_ls_orthogonality: float = 0.0
    errors: int = 0


@dataclass
class RateCurve:
    algorithm: AlgorithmSpec
    points: list

    def rate_at(self, s: int) -> float:
        for p in self.points:
            if p.s == s:
                return p.rate
        raise KeyError(s)


@dataclass(frozen=True)
class CriticalSparsityReport:
    algorithm: AlgorithmSpec
    critical_s: int
    trials: int
    rule: str = "last_full_rate"


@dataclass
class TrialOutcome:
    success: bool
    iterations: int
    wall_ms: float
    ls_orthogonality: float
    error: str | None = None
    digest: str = ""


def run_trial(plan: ExperimentPlan, s: int, trial: int) -> list[TrialOutcome]:
    """Build the (s, trial) instance and run every algorithm on it."""
    inst = build_instance(plan.m, plan.n, s, plan.signal_kind, plan.noise_level,
                          RngStream(plan.master_seed, stream_id(s, trial)))
    x = inst.truth.values
    x_norm = float(np.linalg.norm(x))
    digest = inst.digest()
    out = []
    for spec in plan.algorithms:
        t0 = time.perf_counter()
        try:
            res = run_algorithm(spec, inst, s, plan.stop)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed at s=%d trial=%d: %s", spec.label, s, trial, exc)
            out.append(TrialOutcome(False, 0, (time.perf_counter() - t0) * 1e3, 0.0, str(exc), digest))
            continue
        wall = (time.perf_counter() - t0) * 1e3
        err = float(np.linalg.norm(res.estimate - x))
        out.append(TrialOutcome(err <= plan.success_tolerance * x_norm, res.iterations, wall,
                                res.ls_orthogonality, None, digest))
    return out


def _run_block(plan: ExperimentPlan, s: int, trials: range) -> tuple[int, list]:
    return s, [run_trial(plan, s, t) for t in trials]


def _blocks(plan: ExperimentPlan, workers: int):
    per = plan.trials
    if workers > 1:
        # enough blocks to keep every worker busy near the end
        want = 4 * workers
        n_chunks = max(1, math.ceil(want / len(plan.sweep)))
        per = max(1, math.ceil(plan.trials / n_chunks))
    for s in plan.sweep:
        for start in range(0, plan.trials, per):
            yield s, range(start, min(plan.trials, start + per))


def run_rate_curve(plan: ExperimentPlan, workers: int | None = None,
                   progress=None) -> list[RateCurve]:
    """Exact-reconstruction rate of every algorithm at every swept sparsity."""
    workers = default_workers() if workers is None else max(1, int(workers))
    results: dict[int, list] = {s: [None] * plan.trials for s in plan.sweep}

    def absorb(s, block, trials):
        for t, outs in zip(trials, block):
            results[s][t] = outs
        if progress is not None:
            progress(s, len(trials))

    blocks = list(_blocks(plan, workers))
    if workers == 1:
        for s, trials in blocks:
            absorb(s, _run_block(plan, s, trials)[1], trials)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(pool.submit(_run_block, plan, s, trials), trials) for s, trials in blocks]
            for fut, trials in futures:
                s, block = fut.result()
                absorb(s, block, trials)

    curves = []
    for k, spec in enumerate(plan.algorithms):
        points = []
        for s in plan.sweep:
            outs = [results[s][t][k] for t in range(plan.trials)]
            succ = sum(o.success for o in outs)
            points.append(RatePoint(
                s=s, successes=succ, trials=plan.trials, rate=succ / plan.trials,
                mean_iterations=sum(o.iterations for o in outs) / plan.trials,
                mean_wall_ms=sum(o.wall_ms for o in outs) / plan.trials,
                max_ls_orthogonality=max(o.ls_orthogonality for o in outs),
                errors=sum(o.error is not None for o in outs)))
        curves.append(RateCurve(spec, points))
    return curves


def find_critical_sparsity(curve: RateCurve) -> CriticalSparsityReport:
    """Largest swept ``s`` such that every swept ``s' <= s`` has rate 1."""
    critical = 0
    for p in sorted(curve.points, key=lambda p: p.s):
        if p.successes != p.trials:
            break
        critical = p.s
    trials = curve.points[0].trials if curve.points else 0
    return CriticalSparsityReport(curve.algorithm, critical, trials)


# -- export -----------------------------------------------------------------


def _param_text(spec: AlgorithmSpec) -> str:
    return ";".join(f"{k}={v}" for k, v in spec.params().items() if k != "mu")


def _mu_text(spec: AlgorithmSpec) -> str:
    return repr(float(spec.mu)) if "mu" in spec.params() else ""


def curve_rows(curves) -> list[dict]:
    rows = []
    for c in curves:
        for p in c.points:
            rows.append({"algorithm": c.algorithm.id, "mu": _mu_text(c.algorithm),
                         "params": _param_text(c.algorithm), "s": p.s, "trials": p.trials,
                         "successes": p.successes, "rate": repr(float(p.rate)),
                         "mean_iterations": repr(float(p.mean_iterations)),
                         "mean_wall_ms": f"{p.mean_wall_ms:.3f}"})
    return rows


def export_results(curves, reports, path, format: str = "csv",
                   plan: ExperimentPlan | None = None) -> None:
    """Write curves as CSV, or curves plus reports and plan as JSON."""
    if format not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {format!r}")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if format == "csv":
                w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
                w.writeheader()
                w.writerows(curve_rows(curves))
            else:
                json.dump(results_document(curves, reports, plan), fh, indent=2)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


def results_document(curves, reports, plan=None) -> dict:
    return {
        "artifact_version": __version__,
        "plan": plan.to_dict() if plan is not None else None,
        "l1_success_rule": "debiased on the thresholded support, then relative l2 error",
        "l1_config": asdict(L1Config()) if any(c.algorithm.id == "l1" for c in curves) else None,
        "curves": [{"algorithm": c.algorithm.label, "id": c.algorithm.id,
                    "params": c.algorithm.params(),
                    "points": [vars(p) for p in c.points]} for c in curves],
        "reports": [{"algorithm": r.algorithm.label, "critical_s": r.critical_s,
                     "rule": r.rule, "trials": r.trials} for r in reports],
    }
