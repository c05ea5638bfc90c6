"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings call both backends directly in one process. ``--end-to-end``
also times a short tracking run in two subprocesses, one per value of
``MMTRACK_NUMBA``, since the backend is fixed at import time.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mmtrack.kernels import _numba, _numpy

E2E = """
import time
from mmtrack.config import build_config
from mmtrack.experiments import run_mse_experiment
from mmtrack import kernels
cfg = build_config(dict(n_t=16, n_r=32, g_t=32, g_r=32, blocks=20, realizations=4, m_values=[8], snr_db=[0.0]))
run_mse_experiment(build_config(dict(cfg.echo(), realizations=1)))  # warm-up (jit compile)
t = time.perf_counter()
run_mse_experiment(cfg)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(rng):
    mag = rng.random(4096)
    rows, cols = 64, 400
    phi = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)
    phi /= np.linalg.norm(phi, axis=0)
    phi_h = np.ascontiguousarray(phi.conj().T)
    y = phi[:, 7] * 3.0 + 0.1 * rng.standard_normal(rows)
    z0 = np.zeros(cols, dtype=complex)
    z0[5] = 1.0
    idx = np.array([3, 90, 201], dtype=np.int64)
    vals = np.ones(3, dtype=complex)
    return {
        "top_k(4096, 2)": lambda impl: impl.top_k(mag, 2),
        "sparse_residual(64x400, 3)": lambda impl: impl.sparse_residual(phi, y, idx, vals),
        "iht_run(64x400, L=1, I=10)": lambda impl: impl.iht_run(phi, phi_h, y, z0, 1, 0.5, 10, True, 1e-12),
    }


def bench(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in cases(rng).items():
        fn(_numba)  # compile outside the timed region
        best = {}
        for label, impl in (("numpy", _numpy), ("numba", _numba)):
            t = timeit.Timer(lambda: fn(impl))
            n, _ = t.autorange()
            best[label] = min(t.repeat(repeat, n)) / n
        rows.append((name, best["numpy"], best["numba"]))
    print(f"{'kernel':<30}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, a, b in rows:
        print(f"{name:<30}{a * 1e6:>12.2f}{b * 1e6:>12.2f}{a / b:>10.2f}")


def end_to_end():
    print()
    print("end-to-end MSE run (N_T=16, N_R=32, G=32x32, B=20, R=4, M=8):")
    for flag in ("0", "1"):
        env = dict(os.environ, MMTRACK_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<6} {float(secs):.3f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    bench(args.repeat)
    if args.end_to_end:
        end_to_end()


if __name__ == "__main__":
    main()
