"""Compare the compiled kernels against the numpy fallback.

Kernel timings run both backends in this process; the end-to-end timings
rerun a small rate sweep in subprocesses with ``PURSUITLAB_PURE`` set and
unset, so the whole package picks up each backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pursuitlab import _kernels_py

try:
    from pursuitlab import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

END_TO_END = """
import json, time
from pursuitlab import BACKEND
from pursuitlab.harness import ExperimentPlan, run_rate_curve
from pursuitlab.pursuit import parse_algorithm_list
plan = ExperimentPlan.from_range({smin}, {smax}, 2, m=100, n=1000, signal_kind="gaussian",
                                 trials={trials}, algorithms=tuple(parse_algorithm_list("sp,stp:mu=3,l1")),
                                 master_seed=42)
t0 = time.perf_counter()
curves = run_rate_curve(plan, workers=1)
print(json.dumps({{"backend": BACKEND, "seconds": time.perf_counter() - t0,
                  "successes": [[p.successes for p in c.points] for c in curves]}}))
"""


def cases(rng):
    m, n = 100, 1000
    phi = rng.standard_normal((m, n)) / np.sqrt(m)
    y = rng.standard_normal(m)
    v = rng.standard_normal(n)
    support = np.sort(rng.choice(n, 40, replace=False)).astype(np.int64)
    gram = np.ascontiguousarray(phi[:, :24].T @ phi[:, :24])
    proj = np.ascontiguousarray(np.linalg.solve(phi @ phi.T, phi).T)
    return {
        "top_k(n=1000, k=20)": lambda k: k.top_k(v, 20),
        "hard_threshold(n=1000, k=20)": lambda k: k.hard_threshold(v, 20),
        "qr_solve(100x40)": lambda k: k.qr_solve(phi, y, support, 1e-12),
        "ric_extremes(N=24, s=3)": lambda k: k.ric_extremes(gram, 3),
        "admm_sweep(100x1000, 25 steps)": lambda k: k.admm_sweep(
            phi, proj, y, np.zeros(n), np.zeros(n), np.zeros(n), 0.2, 1.6, 25),
    }


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def end_to_end(pure, trials, smax):
    env = dict(os.environ, PURSUITLAB_PURE="1" if pure else "0")
    code = END_TO_END.format(smin=4, smax=smax, trials=trials)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller end-to-end sweep")
    args = ap.parse_args(argv)

    backends = [_kernels_py] + ([_kernels_c] if _kernels_c is not None else [])
    if _kernels_c is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':34s}" + "".join(f"{b.BACKEND:>12s}" for b in backends) + "     speedup")
    for name, fn in cases(np.random.default_rng(0)).items():
        times = [best_of(lambda: fn(b), args.repeat) for b in backends]
        row = f"{name:34s}" + "".join(f"{t * 1e6:10.1f}us" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:9.2f}x"
        print(row)

    trials, smax = (10, 16) if args.quick else (40, 24)
    runs = [end_to_end(True, trials, smax)] + ([end_to_end(False, trials, smax)] if _kernels_c else [])
    print(f"\nend to end: 100x1000 Gaussian, s=4..{smax} step 2, {trials} trials, sp + stp:mu=3 + l1")
    for r in runs:
        print(f"  {r['backend']:8s} {r['seconds']:7.2f} s")
    if len(runs) == 2:
        same = runs[0]["successes"] == runs[1]["successes"]
        print(f"  speedup {runs[0]['seconds'] / runs[1]['seconds']:.2f}x, identical success counts: {same}")


if __name__ == "__main__":
    main()
