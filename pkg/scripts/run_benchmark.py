"""Run the full pipeline on one synthetic benchmark family and print the headline numbers.

    python3 scripts/run_benchmark.py rigid --out runs/rigid
    python3 scripts/run_benchmark.py sheering --fit-mode velocity_based
    python3 scripts/run_benchmark.py transport --width
"""
import argparse
import json

from morlie.config import RunConfig
from morlie.pipeline import run_pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("family", choices=["rigid", "sheering", "radial", "transport"])
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fit-mode", default="velocity_free")
    ap.add_argument("--sigma", type=float, default=None)
    ap.add_argument("--width", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    bench = {} if args.sigma is None else {"sigma": args.sigma}
    cfg = RunConfig(family=args.family, seed=args.seed, fit_mode=args.fit_mode, width=args.width,
                    workers=args.workers, bench=bench, output=args.out or f"runs/{args.family}")
    res = run_pipeline(cfg)
    s = res.summary
    head = {
        "status": res.status,
        "subalgebra": {k: s.get("subalgebra", {}).get(k) for k in ("dim", "parent_dim")},
        "matches": [f["match"] for f in s.get("subalgebra", {}).get("factors", [])],
        "errors": s.get("errors"),
        "pod": s.get("pod"),
        "clustering": s.get("clustering"),
        "width": s.get("width"),
        "fit": s.get("fit"),
        "timings": {k: round(v, 2) for k, v in res.timings.items()},
        "flags": res.flags,
    }
    print(json.dumps(head, indent=2))


if __name__ == "__main__":
    main()
