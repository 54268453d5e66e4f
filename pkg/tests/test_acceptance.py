"""Acceptance criteria 1-9, one verdict line each.

Every criterion records a PASS/FAIL line (printed in the "acceptance
criteria" section at the end of the pytest run) and then asserts, so a
failing criterion also fails its test.  Tolerances are pinned below and
must not be loosened to make a run pass.
"""

import hashlib
import math
import time

import numpy as np
import pytest

from pursuitlab.harness import ExperimentPlan, find_critical_sparsity, run_rate_curve
from pursuitlab.problems import RngStream, build_instance, make_instance
from pursuitlab.pursuit import AlgorithmSpec, StoppingCriteria, parse_algorithm_list, run_algorithm
from pursuitlab.theory import (
    delta_max,
    exact_ric,
    iteration_bound,
    rho,
    ric_profile,
    stp_lemma_checks,
)

SEED = 42

# 1. theory constants
RHO_AT_BOUNDARY, RHO_TOL = 1.0, 2e-3
DELTA_MAX_MU1, DELTA_MAX_TOL = 0.5340, 5e-4
# 3. critical sparsity, 100x1000, Gaussian signals, 200 trials
GAUSS_SP, GAUSS_HTP, GAUSS_STP3 = (11, 15), (12, 16), (21, 27)
GAUSS_STP3_MARGIN = 6
# 4. critical sparsity, 100x1000, CARS signals, 200 trials
CARS_SP, CARS_STP25, CARS_L1 = (8, 12), (12, 16), (11, 15)
CARS_STP25_VS_L1 = 2
# 5. small-s sanity
SMALL_S_RATE = 0.99
# 6. lemma oracles
LEMMA_SLACK = -1e-9
# 7. contraction
CONTRACTION_SLACK = 1e-9
# 9. hygiene
LS_ORTHOGONALITY = 1e-10

ALL_ALGORITHMS = ("omp,sp,cosamp,iht,niht,htp,stp,stpv2,cosampv2,htpv2,sampv2,fbpv2,"
                  "samp,fbp,l1")


def verdict(log, k, ok, detail):
    log.append((k, f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"))
    return ok


def info(log, k, text):
    log.append((k + 0.5, f"informative after {k}: {text}"))


def in_range(v, lo_hi):
    return lo_hi[0] <= v <= lo_hi[1]


def estimate_hash(x):
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()


# -- shared sweeps -----------------------------------------------------------------


@pytest.fixture(scope="module")
def gaussian_sweep():
    plan = ExperimentPlan.from_range(2, 30, m=100, n=1000, signal_kind="gaussian", trials=200,
                                     algorithms=tuple(parse_algorithm_list("sp,htp,stp:mu=3")),
                                     master_seed=SEED)
    t0 = time.perf_counter()
    curves = run_rate_curve(plan)
    return plan, curves, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cars_sweep():
    plan = ExperimentPlan.from_range(2, 20, m=100, n=1000, signal_kind="cars", trials=200,
                                     algorithms=tuple(parse_algorithm_list("sp,stp:mu=2.5,l1")),
                                     master_seed=SEED)
    t0 = time.perf_counter()
    curves = run_rate_curve(plan)
    return plan, curves, time.perf_counter() - t0


def _small_s_runs():
    specs = parse_algorithm_list(ALL_ALGORITHMS)
    out = {}
    for kind in ("gaussian", "cars"):
        for t in range(100):
            inst = build_instance(100, 1000, 5, kind, 0.0, RngStream(SEED, (5 << 32) | t))
            x = inst.truth.values
            for spec in specs:
                res = run_algorithm(spec, inst, 5)
                ok = np.linalg.norm(res.estimate - x) <= 1e-6 * np.linalg.norm(x)
                out[(kind, t, spec.label)] = (ok, estimate_hash(res.estimate), res.ls_orthogonality)
    return specs, out


@pytest.fixture(scope="module")
def small_s():
    t0 = time.perf_counter()
    specs, runs = _small_s_runs()
    return specs, runs, time.perf_counter() - t0


# -- criteria --------------------------------------------------------------------------


def test_criterion_1_theory_constants(acceptance_log):
    t0 = time.perf_counter()
    r = rho(1.0, 0.5340)
    d = delta_max(1.0)
    elapsed = time.perf_counter() - t0
    ok = abs(r - RHO_AT_BOUNDARY) <= RHO_TOL and abs(d - DELTA_MAX_MU1) <= DELTA_MAX_TOL and elapsed < 1
    assert verdict(acceptance_log, 1, ok,
                   f"rho(1, 0.5340)={r:.6f} (1 +- {RHO_TOL}), delta_max(1)={d:.6f} "
                   f"(0.5340 +- {DELTA_MAX_TOL}), {elapsed * 1e3:.1f} ms")


def test_criterion_2_delta_max_shape(acceptance_log):
    t0 = time.perf_counter()
    mus = [round(0.2 + 0.1 * i, 10) for i in range(34)]
    curve = [delta_max(mu) for mu in mus]
    elapsed = time.perf_counter() - t0
    peak = mus[int(np.argmax(curve))]
    i1 = mus.index(1.0)
    rising = all(b > a for a, b in zip(curve[:i1], curve[1:i1 + 1]))
    falling = all(b < a for a, b in zip(curve[i1:], curve[i1 + 1:]))
    ok = peak == 1.0 and rising and falling and elapsed < 5
    assert verdict(acceptance_log, 2, ok,
                   f"argmax mu={peak}, increasing below 1: {rising}, decreasing above 1: {falling}, "
                   f"{elapsed:.2f} s")


def test_criterion_3_gaussian_critical_sparsity(acceptance_log, gaussian_sweep):
    plan, curves, elapsed = gaussian_sweep
    crit = {c.algorithm.label: find_critical_sparsity(c).critical_s for c in curves}
    sp, htp, stp = crit["sp"], crit["htp:mu=1"], crit["stp:mu=3"]
    ok = (in_range(sp, GAUSS_SP) and in_range(htp, GAUSS_HTP) and in_range(stp, GAUSS_STP3)
          and stp - sp >= GAUSS_STP3_MARGIN)
    # pointwise dominance of stp over sp past s = 15, 3-failure slack per point
    by = {c.algorithm.label: {p.s: p.successes for p in c.points} for c in curves}
    worst = min(by["stp:mu=3"][s] - by["sp"][s] for s in plan.sweep if s >= 15)
    info(acceptance_log, 3, f"stp:mu=3 successes minus sp successes, s >= 15: worst {worst} "
         f"({'ok' if worst >= -3 else 'below'} the -3 slack)")
    assert verdict(acceptance_log, 3, ok,
                   f"sp={sp} {list(GAUSS_SP)}, htp={htp} {list(GAUSS_HTP)}, stp:mu=3={stp} "
                   f"{list(GAUSS_STP3)}, stp-sp={stp - sp} (>= {GAUSS_STP3_MARGIN}), {elapsed:.0f} s")


def test_criterion_4_cars_critical_sparsity(acceptance_log, cars_sweep):
    plan, curves, elapsed = cars_sweep
    crit = {c.algorithm.label: find_critical_sparsity(c).critical_s for c in curves}
    sp, stp, l1 = crit["sp"], crit["stp:mu=2.5"], crit["l1"]
    ok = (in_range(sp, CARS_SP) and in_range(stp, CARS_STP25) and in_range(l1, CARS_L1)
          and stp >= l1 - CARS_STP25_VS_L1)
    assert verdict(acceptance_log, 4, ok,
                   f"sp={sp} {list(CARS_SP)}, stp:mu=2.5={stp} {list(CARS_STP25)}, l1={l1} "
                   f"{list(CARS_L1)}, stp >= l1-{CARS_STP25_VS_L1}: {stp >= l1 - CARS_STP25_VS_L1}, "
                   f"{elapsed:.0f} s")


def test_criterion_5_small_s(acceptance_log, small_s):
    specs, runs, elapsed = small_s
    below = []
    for kind in ("gaussian", "cars"):
        for spec in specs:
            rate = sum(runs[(kind, t, spec.label)][0] for t in range(100)) / 100
            if rate < SMALL_S_RATE:
                below.append(f"{spec.label}/{kind}={rate:.2f}")
    detail = (f"{len(specs)} algorithms x 2 signal kinds at s=5; "
              + (f"below {SMALL_S_RATE}: {', '.join(below)}" if below else f"all >= {SMALL_S_RATE}")
              + f", {elapsed:.0f} s")
    assert verdict(acceptance_log, 5, not below, detail)


def test_criterion_6_lemma_oracles(acceptance_log):
    t0 = time.perf_counter()
    worst = {}
    for t in range(1000):
        noise = 0.0 if t % 2 == 0 else 0.05
        inst = build_instance(8, 12, 2, "gaussian", noise, RngStream(SEED, t))
        deltas = ric_profile(inst.phi, 6)
        for mu in (0.5, 1.0, 2.0):
            for c in stp_lemma_checks(inst, 2, mu, deltas):
                if c.applicable:
                    worst[c.lemma_id] = min(worst.get(c.lemma_id, math.inf), c.slack)
    elapsed = time.perf_counter() - t0
    ok = len(worst) == 6 and min(worst.values()) >= LEMMA_SLACK and elapsed < 120
    text = ", ".join(f"{k}={v:.2e}" for k, v in sorted(worst.items()))
    assert verdict(acceptance_log, 6, ok, f"worst slack per lemma: {text}; {elapsed:.0f} s")


def _contraction_instances():
    for seed in range(200):
        g = np.random.default_rng([SEED, seed])
        s = 1 if seed % 3 == 0 else 2
        eps = (0.1 if s == 1 else 0.06) * (0.7 + 0.6 * g.random())
        n = 12
        phi = np.eye(n) + eps * g.standard_normal((n, n))
        phi /= np.linalg.norm(phi, axis=0)
        x = np.zeros(n)
        x[g.choice(n, s, replace=False)] = g.standard_normal(s)
        yield make_instance(phi, x), s


def test_criterion_7_contraction(acceptance_log):
    used = 0
    worst = math.inf
    bound_ok = True
    for inst, s in _contraction_instances():
        d = exact_ric(inst.phi, 3 * s).delta
        if d >= DELTA_MAX_MU1:
            continue
        r = rho(1.0, d)
        used += 1
        res = run_algorithm(AlgorithmSpec("stp"), inst, s, StoppingCriteria(50, 0.0),
                            record_iterates=True)
        x = inst.truth.values
        nx = np.linalg.norm(x)
        for n, it in enumerate(res.iterates, start=1):
            worst = min(worst, r ** n * nx + CONTRACTION_SLACK - np.linalg.norm(x - it.x))
        exact = [n for n, it in enumerate(res.iterates, start=1)
                 if np.linalg.norm(x - it.x) <= 1e-9 * nx]
        bound_ok &= bool(exact) and exact[0] <= iteration_bound(x, r)
    ok = used >= 50 and worst >= 0 and bound_ok
    assert verdict(acceptance_log, 7, ok,
                   f"{used} instances with delta_3s < 0.5340, worst margin {worst:.2e}, "
                   f"recovery within iteration_bound: {bound_ok}")


def _iterates(spec, inst, s, cap):
    return run_algorithm(spec, inst, s, StoppingCriteria(cap, 0.0), record_iterates=True).iterates


def test_criterion_8_degradation(acceptance_log):
    htp_ok = stp_ok = True
    for t in range(50):
        s = 5 + t % 30
        kind = "gaussian" if t % 2 else "cars"
        inst = build_instance(100, 1000, s, kind, 0.0, RngStream(SEED, (8 << 40) | t))
        v2 = _iterates(AlgorithmSpec("htpv2", alpha=0, mu_prime=1.0, mu=1.0), inst, s, 30)
        ref = _iterates(AlgorithmSpec("htp"), inst, s, 60)
        for n, it in enumerate(v2):
            half, full = ref[2 * n], ref[2 * n + 1]
            htp_ok &= (np.array_equal(it.stages["merged"], half.support)
                       and it.stages["x_tilde"].tobytes() == half.x.tobytes()
                       and np.array_equal(it.support, full.support)
                       and it.x.tobytes() == full.x.tobytes())
        a = _iterates(AlgorithmSpec("stpv2", gamma=0.5), inst, s, 30)
        b = _iterates(AlgorithmSpec("stp"), inst, s, 30)
        stp_ok &= len(a) == len(b) and all(
            np.array_equal(p.support, q.support) and p.x.tobytes() == q.x.tobytes()
            for p, q in zip(a, b))
    assert verdict(acceptance_log, 8, htp_ok and stp_ok,
                   f"50 instances: htpv2(alpha=0) interleaves htp: {htp_ok}; "
                   f"stpv2(s <= gamma m) equals stp: {stp_ok}")


def test_criterion_9_hygiene(acceptance_log, gaussian_sweep, cars_sweep, small_s):
    worst = 0.0
    for _, curves, _ in (gaussian_sweep, cars_sweep):
        for c in curves:
            worst = max([worst] + [p.max_ls_orthogonality for p in c.points])
    specs, runs, _ = small_s
    worst = max([worst] + [v[2] for v in runs.values()])

    # rerun: small-s runs bit for bit, and two sweep columns point for point
    _, again = _small_s_runs()
    same_small = all(runs[k][1] == again[k][1] for k in runs)
    same_sweep = True
    for plan, curves, _ in (gaussian_sweep, cars_sweep):
        sub = ExperimentPlan(m=plan.m, n=plan.n, signal_kind=plan.signal_kind, sweep=(10, 16),
                             trials=plan.trials, algorithms=plan.algorithms,
                             master_seed=plan.master_seed)
        for c0, c1 in zip(curves, run_rate_curve(sub)):
            for p1 in c1.points:
                p0 = next(p for p in c0.points if p.s == p1.s)
                same_sweep &= (p0.successes, p0.mean_iterations, p0.max_ls_orthogonality) == \
                    (p1.successes, p1.mean_iterations, p1.max_ls_orthogonality)
    ok = worst <= LS_ORTHOGONALITY and same_small and same_sweep
    assert verdict(acceptance_log, 9, ok,
                   f"max relative LS orthogonality {worst:.2e} (<= {LS_ORTHOGONALITY:g}); "
                   f"small-s estimates bit-identical on rerun: {same_small}; "
                   f"sweep columns identical on rerun: {same_sweep}")


# -- informative ---------------------------------------------------------------------------


def _scan_critical(spec, m, n, trials, start, stop):
    """Prefix-rule critical sparsity, stopping at the first failed trial."""
    critical = 0
    for s in range(start, stop + 1):
        for t in range(trials):
            inst = build_instance(m, n, s, "gaussian", 0.0, RngStream(SEED, (s << 32) | t))
            res = run_algorithm(spec, inst, s)
            x = inst.truth.values
            if np.linalg.norm(res.estimate - x) > 1e-6 * np.linalg.norm(x):
                return critical
        critical = s
    return critical


def test_informative_stpv2_beyond_half_m(acceptance_log):
    m, n, trials = 150, 300, 100
    stp = _scan_critical(AlgorithmSpec("stp", mu=3.0), m, n, trials, 40, 120)
    gamma = stp / m
    v2 = _scan_critical(AlgorithmSpec("stpv2", mu=3.0, gamma=gamma), m, n, trials, 40, 120)
    info(acceptance_log, 9, f"150x300 Gaussian, {trials} trials: stp:mu=3 critical {stp}, "
         f"stpv2:mu=3,gamma={gamma:.4f} critical {v2} "
         f"({'>=' if v2 >= stp else '<'} stp; ceil(m/2)={math.ceil(m / 2)})")
