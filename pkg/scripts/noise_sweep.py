"""Subalgebra dimension found on the rigid benchmark as the noise level grows.

The velocity-free fit is the slow part (about 5 s per trajectory at the
default size); --n-traj trades data for runtime.

    python3 scripts/noise_sweep.py --sigmas 0 1e-4 1e-3 1e-2 --n-traj 3
"""
import argparse
import csv
import sys
import time

import numpy as np

from morlie.actions import affine_cloud_action
from morlie.datagen import BenchmarkConfig, generate
from morlie.fitting import fit_velocity_based, fit_velocity_free
from morlie.subalgebra import subalgebra_search


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 1e-4, 1e-3, 3e-3, 1e-2])
    ap.add_argument("--n-traj", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fit-mode", choices=["velocity_based", "velocity_free"], default="velocity_free")
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    spec = affine_cloud_action()
    rows = []
    for sigma in args.sigmas:
        t0 = time.perf_counter()
        S, _ = generate(BenchmarkConfig(n_traj=args.n_traj, sigma=sigma, rng_seed=args.seed))
        Sg = fit_velocity_based(spec, S)
        if args.fit_mode == "velocity_free":
            Sg = fit_velocity_free(spec, S, init=Sg)
        sub = subalgebra_search(Sg, 0.99)
        s = np.linalg.svd(Sg.coeffs, compute_uv=False)
        rows.append({
            "sigma": sigma, "dim": sub.dim, "match": sub.match or "-", "kept": len(sub.kept_directions),
            "s6_over_s7": float(s[5] / s[6]), "seconds": round(time.perf_counter() - t0, 1),
        })
        print(rows[-1], flush=True)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
