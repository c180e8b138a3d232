#!/usr/bin/env python3
"""Benchmark the compiled inner-loop kernels against the pure-numpy fallback.

Times the two hot kernels on representative agent subproblem sizes, then an
end-to-end consensus run under each backend. Run after `pip install -e .`:

    python benchmarks/bench_backends.py
"""

import os
import subprocess
import sys
import timeit

import numpy as np

from featadmm import _inner_loops_py as py_impl

try:
    from featadmm import _inner_loops as c_impl
except ImportError:
    c_impl = None


def bench_ista(impl, m, p, repeats=200):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((m, p))
    gram = np.ascontiguousarray(a.T @ a)
    lin = rng.standard_normal(p)
    lip = 2.0 * 3.0 * np.linalg.eigvalsh(gram)[-1] + 2.0
    phi0 = rng.standard_normal(p)
    args = (gram, lin, 3.0, 0.5, 1.0, phi0, 1.0 / lip, 200, 1e-10)
    return min(
        timeit.repeat(lambda: impl.ista_quadratic(*args), number=repeats, repeat=5)
    ) / repeats


def bench_subgrad(impl, m, p, repeats=50):
    rng = np.random.default_rng(1)
    a = np.ascontiguousarray(rng.standard_normal((m, p)))
    q = rng.standard_normal(m)
    phi0 = rng.standard_normal(p)
    args = (a, q, 4.0, 0.0, 0.001, phi0, 0.5, 200, 0)
    return min(
        timeit.repeat(lambda: impl.subgrad_composite(*args), number=repeats, repeat=5)
    ) / repeats


def bench_end_to_end(backend_env):
    """Time a short preset run in a subprocess so the backend choice sticks."""
    code = (
        "import time\n"
        "from featadmm import synthesize, make_random_connected, squared_l2_loss,\\\n"
        "    elastic_net, RunConfig, run, BACKEND\n"
        "fp = synthesize(10, 500, 2, 0.1, seed=1)\n"
        "topo = make_random_connected(10, 3.0, seed=2)\n"
        "cfg = RunConfig(max_rounds=300, rho=2.0, seed=0)\n"
        "t0 = time.perf_counter()\n"
        "run(fp, topo, squared_l2_loss(), [elastic_net(1.0, 1.0)]*10, cfg, orientation=-1)\n"
        "print(BACKEND, time.perf_counter() - t0)\n"
    )
    env = dict(os.environ)
    env["FEATADMM_PURE_PYTHON"] = backend_env
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env,
        check=True,
    ).stdout.split()
    return out[0], float(out[1])


def main():
    if c_impl is None:
        print("compiled extension not built; only the python backend is available")
    print(f"{'kernel':<28}{'size':<14}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for m, p in ((500, 2), (500, 10), (1000, 50)):
        t_py = bench_ista(py_impl, m, p)
        row = f"{'ista_quadratic':<28}{f'M={m} P_i={p}':<14}{t_py * 1e6:>10.1f}us"
        if c_impl is not None:
            t_c = bench_ista(c_impl, m, p)
            row += f"{t_c * 1e6:>10.1f}us{t_py / t_c:>9.1f}x"
        print(row)
    for m, p in ((30, 2), (200, 10)):
        t_py = bench_subgrad(py_impl, m, p)
        row = f"{'subgrad_composite':<28}{f'M={m} P_i={p}':<14}{t_py * 1e6:>10.1f}us"
        if c_impl is not None:
            t_c = bench_subgrad(c_impl, m, p)
            row += f"{t_c * 1e6:>10.1f}us{t_py / t_c:>9.1f}x"
        print(row)

    print()
    name, t = bench_end_to_end("1")
    print(f"end-to-end 300 rounds (backend={name}): {t:.2f}s")
    if c_impl is not None:
        name, t = bench_end_to_end("0")
        print(f"end-to-end 300 rounds (backend={name}): {t:.2f}s")


if __name__ == "__main__":
    main()
