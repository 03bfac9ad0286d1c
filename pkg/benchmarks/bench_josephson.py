"""Compare the compiled and pure-Python Josephson integrators.

Usage::

    python3 benchmarks/bench_josephson.py [--t-end 200] [--repeat 5]

Each backend integrates the same set of orbits (Rabi, Josephson, pi-mode and
self-trapped); the best wall time over ``--repeat`` runs is reported together
with the largest deviation between the two backends' final states.
"""

import argparse
import math
import time

from mwlab import _kernels, meanfield as mf
from mwlab.twomode import BoseHubbardParams

ORBITS = [  # (gamma N, z0, phi0)
    (0.0, 0.5, 0.0),
    (5.0, 0.3, 0.2),
    (1.5, 0.1, math.pi),
    (12.0, 0.6, 0.0),
]


def run_backend(backend: str, t_end: float, tol: float):
    finals = []
    steps = 0
    for gn, z0, phi0 in ORBITS:
        p = BoseHubbardParams.from_gamma(100, gn / 100, J=0.5)
        traj = mf.integrate((z0, phi0), p, t_end, tol=tol, t_eval=[t_end], backend=backend)
        finals.append((traj.z[-1], traj.phi[-1]))
        steps += traj.n_accepted + traj.n_rejected
    return finals, steps


def best_time(backend: str, t_end: float, tol: float, repeat: int):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = run_backend(backend, t_end, tol)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=200.0, help="run length in 1/Omega_R")
    ap.add_argument("--tol", type=float, default=1e-9)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = _kernels.available_backends()
    results = {}
    print(f"{'backend':<8} {'best [s]':>10} {'steps':>8} {'us/step':>9}")
    for b in backends:
        elapsed, (finals, steps) = best_time(b, args.t_end, args.tol, args.repeat)
        results[b] = (elapsed, finals)
        print(f"{b:<8} {elapsed:10.4f} {steps:8d} {1e6 * elapsed / steps:9.2f}")
    if "cython" in results and "python" in results:
        speedup = results["python"][0] / results["cython"][0]
        dev = max(max(abs(a[0] - b[0]), abs(a[1] - b[1]))
                  for a, b in zip(results["python"][1], results["cython"][1]))
        print(f"speedup {speedup:.1f}x, max final-state deviation {dev:.1e}")
    else:
        print("compiled kernel not built; only the pure-Python backend was timed")


if __name__ == "__main__":
    main()
