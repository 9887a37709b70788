"""End-to-end run: data, clustering, fits, subalgebra, rho_theta, ROM, evaluation, report."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actions import (
    ActionSpec,
    affine_cloud_action,
    clustered_affine_action,
    grid_translation_action,
    so2_polar_action,
)
from .clustering import accuracy, cluster_search
from .config import RunConfig
from .datagen import generate
from .fitting import (
    ReducedSnapshotMatrix,
    SnapshotSet,
    fit_rho_theta,
    fit_velocity_based,
    fit_velocity_free,
    one_step_costs,
)
from .io import ingest_csv
from .lie_core import aff3_basis
from .metrics import estimate_group_width, pod_reconstruct_error, pod_svd, trajectory_errors
from .report import emit_report
from .rom import RomModel, Trajectory, integrate_rom
from .subalgebra import subalgebra_search

EXIT_OK, EXIT_FAILED, EXIT_FLAGGED = 0, 1, 2


@dataclass
class RunResults:
    config: RunConfig
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    S: SnapshotSet | None = None
    truth: object = None
    spec: ActionSpec | None = None
    Sg: ReducedSnapshotMatrix | None = None
    rho: object = None
    roms: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)  # mode -> list of (times, errors) per trajectory
    pod: object = None
    assignment: np.ndarray | None = None
    failed: str | None = None

    @property
    def status(self) -> int:
        if self.failed:
            return EXIT_FAILED
        return EXIT_FLAGGED if self.flags else EXIT_OK


def _concat(parts: list[ReducedSnapshotMatrix]) -> ReducedSnapshotMatrix:
    def cat(name):
        vals = [getattr(p, name) for p in parts]
        return None if any(v is None for v in vals) else np.concatenate(vals)

    return ReducedSnapshotMatrix(
        np.concatenate([p.coeffs for p in parts]), cat("traj_ids"), cat("steps"), cat("times"),
        parts[0].basis, max(p.t_end for p in parts), cat("costs"), cat("converged"), cat("rank_deficient"),
    )


def _vf_job(args):
    spec, S = args
    return fit_velocity_free(spec, S)


def fit_velocity_free_parallel(spec: ActionSpec, S: SnapshotSet, workers: int = 1) -> ReducedSnapshotMatrix:
    """fit_velocity_free split over trajectories; results merged in trajectory order."""
    if workers <= 1 or S.n_traj == 1:
        return fit_velocity_free(spec, S)
    jobs = [(spec, S.subset([j])) for j in range(S.n_traj)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_vf_job, jobs))
    out = _concat(parts)
    return ReducedSnapshotMatrix(out.coeffs, out.traj_ids, out.steps, out.times, out.basis,
                                 S.time_range()[1], out.costs, out.converged, out.rank_deficient)


def _base_action(cfg: RunConfig, S: SnapshotSet, res: RunResults) -> ActionSpec:
    kind = cfg.action
    if kind == "auto":
        kind = {"polar2d": "so2_polar", "grid1d": "grid_translation"}.get(S.chart_tag)
        if kind is None:
            cluster = cfg.cluster if cfg.cluster is not None else cfg.input is None and cfg.family == "sheering"
            kind = "clustered_affine" if cluster else "affine_cloud"
    if kind == "affine_cloud":
        return affine_cloud_action()
    if kind == "so2_polar":
        return so2_polar_action()
    if kind == "grid_translation":
        return grid_translation_action()
    t0 = time.perf_counter()
    n_g, assignment = cluster_search(S, cfg.n_neighbors, cfg.residual_tol, cfg.seed, cfg.cluster_window)
    res.timings["cluster"] = time.perf_counter() - t0
    res.assignment = assignment
    res.summary["clustering"] = {"n_G": int(n_g), "sizes": np.bincount(assignment).tolist()}
    if res.truth is not None and getattr(res.truth, "assignment", None) is not None:
        res.summary["clustering"]["accuracy"] = accuracy(assignment, res.truth.assignment)
    return clustered_affine_action(assignment)


def _fit(cfg: RunConfig, spec: ActionSpec, S: SnapshotSet, res: RunResults, tag: str) -> ReducedSnapshotMatrix:
    t0 = time.perf_counter()
    vb = fit_velocity_based(spec, S)
    out = {"velocity_based_cost": float(one_step_costs(spec, S, vb).sum())}
    Sg = vb
    if cfg.fit_mode in ("velocity_free", "both"):
        vf = fit_velocity_free_parallel(spec, S, cfg.workers)
        out["velocity_free_cost"] = float(vf.costs.sum())
        out["not_converged"] = int(np.sum(~vf.converged))
        if out["not_converged"]:
            res.flags.append(f"{tag}: {out['not_converged']} LM solves hit the iteration limit")
        Sg = vf
    if vb.rank_deficient is not None and np.any(vb.rank_deficient):
        res.flags.append(f"{tag}: {int(vb.rank_deficient.sum())} rank-deficient projections")
    res.timings[tag] = time.perf_counter() - t0
    res.summary[tag] = out
    return Sg


def _factor_view(Sg: ReducedSnapshotMatrix, f: int) -> ReducedSnapshotMatrix:
    return ReducedSnapshotMatrix(Sg.coeffs[:, 12 * f:12 * f + 12], Sg.traj_ids, Sg.steps, Sg.times,
                                 aff3_basis(), Sg.t_end)


def _subalgebra(cfg: RunConfig, spec: ActionSpec, Sg: ReducedSnapshotMatrix, res: RunResults) -> ActionSpec:
    t0 = time.perf_counter()
    if spec.kind == "clustered_affine":
        subs = [subalgebra_search(_factor_view(Sg, f), cfg.energy_fraction, cfg.closure_tol)
                for f in range(spec.n_factors)]
        new = clustered_affine_action(spec.cluster_assignment, [s.basis for s in subs])
    else:
        subs = [subalgebra_search(Sg, cfg.energy_fraction, cfg.closure_tol)]
        new = ActionSpec(spec.kind, subs[0].basis, None, spec.ambient_dim)
    res.timings["subalgebra"] = time.perf_counter() - t0
    s_all = np.linalg.svd(Sg.coeffs, compute_uv=False)
    res.summary["subalgebra"] = {
        "dim": int(sum(s.dim for s in subs)),
        "parent_dim": int(spec.dim),
        "factors": [
            {"dim": s.dim, "match": s.match, "energy_fraction": s.energy_fraction,
             "closure_residual": s.closure_residual, "closed": bool(s.closed), "rounds": s.rounds}
            for s in subs
        ],
        "sg_singular_values": s_all.tolist(),
    }
    for i, s in enumerate(subs):
        if not s.closed:
            res.flags.append(f"subalgebra factor {i} did not close")
    return new


def param_groups(S: SnapshotSet) -> list[list[int]]:
    """Trajectory indices grouped by identical parameter vectors, in first-seen order."""
    groups: dict[bytes, list[int]] = {}
    for j, p in enumerate(S.params):
        groups.setdefault(np.asarray(p, float).tobytes(), []).append(j)
    return list(groups.values())


def _fit_rho(cfg: RunConfig, res: RunResults) -> None:
    """One rho_theta per parameter value; trajectories sharing it are averaged."""
    S, Sg = res.S, res.Sg
    res.rho = [None] * S.n_traj
    info = []
    for group in param_groups(S):
        ids = [S.traj_ids[j] for j in group]
        mask = np.isin(Sg.traj_ids, ids)
        sub = ReducedSnapshotMatrix(Sg.coeffs[mask], Sg.traj_ids[mask], Sg.steps[mask], Sg.times[mask],
                                    Sg.basis, max(float(S.times[j][-1]) for j in group))
        n_seg = clip_segments(sub, cfg.n_segments, cfg.stride)
        rho = fit_rho_theta(sub, n_seg, cfg.stride)
        for j in group:
            res.rho[j] = rho
        info.append({"trajectories": ids, "param": S.params[group[0]].tolist(), "rmse": rho.rmse,
                     "n_segments": n_seg})
    res.summary["rho_theta"] = {"stride": cfg.stride, "groups": info}


def clip_segments(Sg: ReducedSnapshotMatrix, n_segments: int, stride: int) -> int:
    """Largest segment count <= n_segments that the strided samples of Sg can determine."""
    n_points = len(range(0, int(Sg.steps.max()) + 1, stride)) + 1
    return max(1, min(n_segments, n_points - 1))


def _evaluate(cfg: RunConfig, res: RunResults) -> None:
    S, spec = res.S, res.spec
    t0 = time.perf_counter()
    res.roms, res.errors = [], {"full": [], "step_ahead": []}
    for j in range(S.n_traj):
        model = RomModel(spec, res.rho[j], S.state(j, 0))
        res.roms.append(integrate_rom(model, S.times[j], cfg.integrator))
        fom = Trajectory(S.times[j], S.states[j], S.chart_tag, "fom", None, S.meta)
        for mode in ("full", "step_ahead"):
            res.errors[mode].append(trajectory_errors(fom, model, mode, cfg.integrator))
    res.timings["simulate"] = time.perf_counter() - t0
    err = {}
    for mode, curves in res.errors.items():
        e = np.concatenate([c[1] for c in curves]) if curves else np.zeros(0)
        err[mode] = {"mean": float(e.mean()) if e.size else 0.0, "max": float(e.max(initial=0.0))}
    res.summary["errors"] = err

    t0 = time.perf_counter()
    pod = pod_svd(S)
    res.pod = pod
    k99 = pod.n_modes(0.99)
    n_h = min(res.summary["subalgebra"]["dim"], pod.rank)
    sup_h, mean_h = pod_reconstruct_error(S, n_h, pod=pod)
    res.summary["pod"] = {
        "rank": pod.rank, "k_0.99": k99, "modes_at_group_dim": n_h,
        "error_at_group_dim": {"sup": sup_h, "mean": mean_h},
    }
    res.timings["pod"] = time.perf_counter() - t0
    if cfg.width:
        t0 = time.perf_counter()
        w = estimate_group_width(S, spec, None, cfg.width_horizon)
        res.summary["width"] = {"value": w.width, "flagged": int(w.flagged.sum()), "argmax": w.argmax}
        if w.flagged.any():
            res.flags.append(f"width: {int(w.flagged.sum())} orbit-distance solves did not converge")
        res.timings["width"] = time.perf_counter() - t0


def run_pipeline(cfg: RunConfig, emit: bool = True) -> RunResults:
    """Run every stage; a failing stage stops the run and the partial report is kept."""
    res = RunResults(cfg)
    res.summary["config"] = cfg.to_dict()
    stage = "data"
    try:
        t0 = time.perf_counter()
        if cfg.input is not None:
            res.S = ingest_csv(cfg.input)
        else:
            res.S, res.truth = generate(cfg.benchmark())
        res.timings["data"] = time.perf_counter() - t0
        S = res.S
        res.summary["data"] = {"chart": S.chart_tag, "n_traj": S.n_traj, "n_snapshots": S.n_snapshots,
                               "state_dim": S.width}
        stage = "action"
        base = _base_action(cfg, S, res)
        stage = "fit"
        Sg = _fit(cfg, base, S, res, "fit")
        stage = "subalgebra"
        spec = _subalgebra(cfg, base, Sg, res)
        stage = "refit"
        if spec.dim != base.dim:
            Sg = _fit(cfg, spec, S, res, "refit")
        else:
            Sg = Sg.rebase(spec.group_basis)
        res.spec, res.Sg = spec, Sg
        res.summary["action"] = spec.to_dict()
        res.summary["action"].pop("cluster_assignment", None)
        stage = "rho_theta"
        t0 = time.perf_counter()
        _fit_rho(cfg, res)
        res.timings["rho_theta"] = time.perf_counter() - t0
        stage = "evaluate"
        _evaluate(cfg, res)
    except Exception as err:  # partial report is kept
        res.failed = stage
        res.summary["failure"] = {"stage": stage, "error": f"{type(err).__name__}: {err}"}
    res.summary["flags"] = list(res.flags)
    res.summary["status"] = res.status
    if emit:
        emit_report(res, Path(cfg.output))
    return res
