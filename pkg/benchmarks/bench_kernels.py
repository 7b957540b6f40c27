"""Time the ensemble kernels in both flavors.

Runs the diffusive and counting steppers over identical pre-drawn noise with
RETROQ_BACKEND forced to numpy and to numba (if importable) and prints a
small table. The first numba call pays JIT compilation; a warmup run keeps
that out of the timed numbers.

Usage: python benchmarks/bench_kernels.py [--traj 2000] [--steps 500] [--dim 2]
"""

import argparse
import time

import numpy as np

from retroq import _accel
from retroq import algebra as al
from retroq import trajectories as tr


def build_models(dim):
    if dim == 2:
        h = 0.9 * al.SX
        c = al.SM
    else:
        g = np.random.default_rng(0)
        a = g.normal(size=(dim, dim)) + 1j * g.normal(size=(dim, dim))
        h = 0.9 * 0.5 * (a + a.conj().T)
        c = np.diag(np.sqrt(np.arange(1.0, dim)), k=1)  # lowering operator
    dm = tr.monitoring_model(h, c, 1.0, eta=0.6, mode="diffusive")
    cm = tr.monitoring_model(h, c, 1.0, eta=1.0, mode="counting")
    return dm, cm


def run_once(model, rho0, horizon, dt, n_traj, seed, which):
    if model.mode == "diffusive":
        fn = tr.ensemble_homodyne
    else:
        fn = tr.ensemble_counting
    import os

    os.environ["RETROQ_BACKEND"] = which
    t0 = time.perf_counter()
    fn(model, rho0, horizon, dt, n_traj=n_traj, seed=seed)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--traj", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--dim", type=int, default=2)
    args = ap.parse_args()

    dt = 1e-3
    horizon = args.steps * dt
    dm, cm = build_models(args.dim)
    rho0 = np.eye(args.dim, dtype=complex) / args.dim

    flavors = ["numpy"]
    if _accel.HAVE_NUMBA:
        flavors.append("numba")
        # warmup to compile outside the timing
        run_once(dm, rho0, 10 * dt, dt, 2, 0, "numba")
        run_once(cm, rho0, 10 * dt, dt, 2, 0, "numba")
    else:
        print("numba not importable; timing numpy flavor only")

    print(f"{args.traj} trajectories x {args.steps} steps, dim {args.dim}")
    print(f"{'kernel':<10} {'numpy [s]':>10} " + (f"{'numba [s]':>10} {'speedup':>8}" if len(flavors) > 1 else ""))
    for name, model in (("homodyne", dm), ("counting", cm)):
        times = {w: run_once(model, rho0, horizon, dt, args.traj, 1, w) for w in flavors}
        row = f"{name:<10} {times['numpy']:>10.3f} "
        if "numba" in times:
            row += f"{times['numba']:>10.3f} {times['numpy'] / times['numba']:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
