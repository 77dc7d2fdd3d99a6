"""Time the numba and numpy backends on the hot kernels and on full greedy runs.

    python benchmarks/bench_backends.py [--n 2000] [--repeat 5]

Kernel timings call both implementations in-process.  End-to-end runs are
executed in subprocesses, because the backend is fixed at import time by
SMISELECT_BACKEND.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from smiselect import _kernels
from smiselect._accel import kernels

E2E = """
import json, time, numpy as np
from smiselect.smi import make_smi
from smiselect.maximizer import maximize
from smiselect._accel import BACKEND
rng = np.random.default_rng(0)
n, q = {n}, 20
x = np.abs(rng.normal(size=(n + q, 32)))
x /= np.linalg.norm(x, axis=1, keepdims=True)
j = x @ x.T
ground, cross, query = j[:n, :n] + 1e-3 * np.eye(n), j[:n, n:], j[n:, n:] + 1e-3 * np.eye(q)
out = {{"backend": BACKEND}}
for kind in ("flvmi", "flqmi", "logdetmi"):
    for method in ("lazy", "stochastic"):
        f = make_smi(kind, ground, cross, query)
        maximize(f, np.arange(n), 2, method)  # warm-up / JIT
        f = make_smi(kind, ground, cross, query)
        t = time.perf_counter()
        maximize(f, np.arange(n), {budget}, method)
        out[f"{{kind}}/{{method}}"] = time.perf_counter() - t
print(json.dumps(out))
"""


def kernel_timings(n: int, repeat: int) -> dict:
    rng = np.random.default_rng(0)
    ground = rng.uniform(size=(n, n))
    cand = np.arange(n, dtype=np.int64)
    cur = rng.uniform(size=n)
    qmax = rng.uniform(size=n)
    contrib = np.minimum(cur, qmax)
    cross = rng.uniform(size=(n, 50))
    qcur = rng.uniform(size=50)
    x = rng.normal(size=(n, 64))
    s = x @ x.T + n * np.eye(n)
    rows = {}
    for backend in ("numpy", "numba"):
        k = kernels(backend)
        k["flv_gains"](ground, cand[:2], cur, qmax, contrib)  # warm-up / JIT
        k["flq_gains"](cross, cand[:2], qcur, qcur.copy(), cross.max(axis=1))
        k["min_sqdist_update"](x, x[0].copy(), np.full(n, np.inf))

        def chol():
            vecs, diag = np.zeros((n, 32)), np.diag(s).copy()
            for m in range(32):
                k["chol_append"](vecs, diag, s[m].copy(), m, m)

        chol()
        cases = {
            "flv_gains": lambda: k["flv_gains"](ground, cand, cur, qmax, contrib),
            "flq_gains": lambda: k["flq_gains"](cross, cand, qcur, qcur.copy(), cross.max(axis=1)),
            "min_sqdist_update": lambda: k["min_sqdist_update"](x, x[0].copy(), np.full(n, np.inf)),
            "chol_append x32": chol,
        }
        for name, fn in cases.items():
            rows.setdefault(name, {})[backend] = min(timeit.repeat(fn, number=3, repeat=repeat)) / 3
    return rows


def e2e_timings(n: int, budget: int) -> dict:
    out = {}
    for backend in ("numpy", "numba"):
        env = {**os.environ, "SMISELECT_BACKEND": backend}
        res = subprocess.run([sys.executable, "-c", E2E.format(n=n, budget=budget)], env=env,
                             capture_output=True, text=True, check=True)
        out[backend] = json.loads(res.stdout)
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    print(f"kernels, n={args.n} (seconds per call, best of {args.repeat})")
    print(f"{'kernel':<20}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, t in kernel_timings(args.n, args.repeat).items():
        print(f"{name:<20}{t['numpy']:>12.2e}{t['numba']:>12.2e}{t['numpy'] / t['numba']:>9.1f}x")

    print(f"\nend-to-end greedy, n={args.n}, B={args.budget} (seconds)")
    e2e = e2e_timings(args.n, args.budget)
    print(f"{'objective/maximizer':<20}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for key in e2e["numpy"]:
        if key == "backend":
            continue
        a, b = e2e["numpy"][key], e2e["numba"][key]
        print(f"{key:<20}{a:>12.3f}{b:>12.3f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
