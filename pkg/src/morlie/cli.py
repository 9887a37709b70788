"""Command-line interface: one subcommand per pipeline stage plus the full pipeline."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .actions import affine_cloud_action, clustered_affine_action, grid_translation_action, so2_polar_action
from .clustering import cluster_search
from .config import BENCH_KEYS, RUN_KEYS, from_mapping, workers_from_env
from .datagen import generate
from .fitting import ReducedSnapshotMatrix, SnapshotSet, fit_rho_theta, fit_velocity_based
from .io import (
    export_csv,
    ingest_csv,
    parse_config,
    read_assignment,
    read_sg,
    write_assignment,
    write_rho,
    write_sg,
    write_table,
    write_truth,
)
from .metrics import distance, estimate_group_width, pod_svd
from .pipeline import clip_segments, fit_velocity_free_parallel, param_groups, run_pipeline
from .report import dump_json, render_plots, to_native
from .rom import RomModel, integrate_rom
from .subalgebra import subalgebra_search

STAGE_KEYS = {
    "generate": ("family", "seed") + BENCH_KEYS,
    "cluster": ("seed", "n_neighbors", "residual_tol", "cluster_window"),
    "fit": ("action", "fit_mode", "workers"),
    "reduce": ("energy_fraction", "closure_tol"),
    "simulate": ("action", "n_segments", "stride", "integrator"),
    "evaluate": (),
    "width": ("action", "width_horizon"),
    "report": (),
    "pipeline": RUN_KEYS + BENCH_KEYS,
}
FILE_ARGS = {
    "generate": ("out", "truth"),
    "cluster": ("input", "out"),
    "fit": ("input", "assignment", "out"),
    "reduce": ("sg", "out"),
    "simulate": ("input", "sg", "assignment", "out", "rho"),
    "evaluate": ("input", "reconstruction", "out"),
    "width": ("input", "assignment", "out"),
    "report": ("dir",),
    "pipeline": (),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morlie", description="Model order reduction on Lie groups.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, keys in STAGE_KEYS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat `key = value` file; flags override it")
        for key in dict.fromkeys(keys):
            p.add_argument(f"--{key}", dest=key, default=None)
        for key in FILE_ARGS[name]:
            p.add_argument(f"--{key}", dest=key, default=None)
    return ap


def _settings(args, command: str) -> dict:
    vals = parse_config(args.config) if args.config else {}
    for key in STAGE_KEYS[command]:
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    return vals


def _files(args, command: str, vals: dict) -> dict:
    out = {}
    for key in FILE_ARGS[command]:
        v = getattr(args, key, None)
        out[key] = v if v is not None else vals.pop(key, None)
    return out


def _action(kind: str | None, chart: str, assignment_path: str | None):
    kind = kind or "auto"
    if kind == "auto":
        kind = {"polar2d": "so2_polar", "grid1d": "grid_translation"}.get(
            chart, "clustered_affine" if assignment_path else "affine_cloud")
    if kind == "clustered_affine":
        if not assignment_path:
            raise ValueError("clustered_affine needs --assignment")
        return clustered_affine_action(read_assignment(assignment_path))
    return {"affine_cloud": affine_cloud_action, "so2_polar": so2_polar_action,
            "grid_translation": grid_translation_action}[kind]()


def _require(files: dict, *names):
    for n in names:
        if not files.get(n):
            raise ValueError(f"--{n} is required")


def cmd_generate(cfg, files):
    _require(files, "out")
    S, truth = generate(cfg.benchmark())
    export_csv(S, files["out"])
    if files.get("truth") and truth is not None:
        write_truth(files["truth"], truth.times, truth.group_path, truth.assignment)
    return 0


def cmd_cluster(cfg, files):
    _require(files, "input", "out")
    S = ingest_csv(files["input"])
    n_g, a = cluster_search(S, cfg.n_neighbors, cfg.residual_tol, cfg.seed, cfg.cluster_window)
    write_assignment(files["out"], a)
    print(json.dumps({"n_G": n_g}))
    return 0


def cmd_fit(cfg, files):
    _require(files, "input", "out")
    S = ingest_csv(files["input"])
    spec = _action(cfg.action, S.chart_tag, files.get("assignment"))
    if cfg.fit_mode == "velocity_based":
        Sg = fit_velocity_based(spec, S)
    else:
        Sg = fit_velocity_free_parallel(spec, S, cfg.workers)
    write_sg(files["out"], Sg)
    return 0 if Sg.all_converged else 2


def cmd_reduce(cfg, files):
    _require(files, "sg")
    sub = subalgebra_search(read_sg(files["sg"]), cfg.energy_fraction, cfg.closure_tol)
    out = {"dim": sub.dim, "match": sub.match, "energy_fraction": sub.energy_fraction,
           "closure_residual": sub.closure_residual, "closed": sub.closed, "rounds": sub.rounds,
           "basis": sub.basis.elements}
    if files.get("out"):
        dump_json(files["out"], to_native(out))
    print(json.dumps({k: to_native(v) for k, v in out.items() if k != "basis"}))
    return 0 if sub.closed else 2


def cmd_simulate(cfg, files):
    _require(files, "input", "sg", "out")
    S = ingest_csv(files["input"])
    Sg = read_sg(files["sg"])
    spec = _action(cfg.action, S.chart_tag, files.get("assignment"))
    if Sg.basis.dim != spec.dim or not np.allclose(Sg.basis.elements, spec.group_basis.elements):
        spec = type(spec)(spec.kind, Sg.basis, spec.cluster_assignment, spec.ambient_dim)
    states = [None] * S.n_traj
    for n, group in enumerate(param_groups(S)):
        ids = [S.traj_ids[j] for j in group]
        m = np.isin(Sg.traj_ids, ids)
        sub = ReducedSnapshotMatrix(Sg.coeffs[m], Sg.traj_ids[m], Sg.steps[m], Sg.times[m], Sg.basis,
                                    max(float(S.times[j][-1]) for j in group))
        rho = fit_rho_theta(sub, clip_segments(sub, cfg.n_segments, cfg.stride), cfg.stride)
        if files.get("rho"):
            write_rho(Path(files["rho"]).with_suffix(f".{n}.csv"), rho)
        for j in group:
            states[j] = integrate_rom(RomModel(spec, rho, S.state(j, 0)), S.times[j], cfg.integrator).states
    export_csv(SnapshotSet(S.chart_tag, S.times, tuple(states), S.params, S.traj_ids, S.meta), files["out"])
    return 0


def cmd_evaluate(cfg, files):
    _require(files, "input", "reconstruction")
    S, R = ingest_csv(files["input"]), ingest_csv(files["reconstruction"])
    if S.traj_ids != R.traj_ids or any(not np.array_equal(a, b) for a, b in zip(S.times, R.times)):
        raise ValueError("data and reconstruction time grids are not aligned")
    rows = []
    for j, tid in enumerate(S.traj_ids):
        for t, x, y in zip(S.times[j], S.states[j], R.states[j]):
            rows.append((tid, t, distance(S.chart_tag, y, x, "mean", S.meta)))
    if files.get("out"):
        write_table(files["out"], ["traj", "time", "error"], rows)
    e = np.array([r[2] for r in rows])
    pod = pod_svd(S)
    print(json.dumps({"mean_error": float(e.mean()), "max_error": float(e.max()), "pod_rank": pod.rank,
                      "pod_k_0.99": pod.n_modes(0.99)}))
    return 0


def cmd_width(cfg, files):
    _require(files, "input")
    S = ingest_csv(files["input"])
    spec = _action(cfg.action, S.chart_tag, files.get("assignment"))
    w = estimate_group_width(S, spec, None, cfg.width_horizon)
    out = {"width": w.width, "flagged": int(w.flagged.sum()), "argmax": w.argmax}
    if files.get("out"):
        dump_json(files["out"], out)
    print(json.dumps(out))
    return 0 if not w.flagged.any() else 2


def cmd_report(cfg, files):
    _require(files, "dir")
    render_plots(Path(files["dir"]))
    return 0


def cmd_pipeline(cfg, files):
    res = run_pipeline(cfg)
    s = res.summary
    print(json.dumps({"status": res.status, "output": str(cfg.output), "flags": res.flags,
                      "failure": s.get("failure"), "subalgebra_dim": s.get("subalgebra", {}).get("dim")}))
    return res.status


COMMANDS = {name[4:]: fn for name, fn in globals().items() if name.startswith("cmd_")}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        vals = _settings(args, args.command)
        files = _files(args, args.command, vals)
        vals.setdefault("workers", str(workers_from_env()))
        cfg = from_mapping(vals)
        return COMMANDS[args.command](cfg, files)
    except (ValueError, OSError) as err:
        print(f"morlie {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
