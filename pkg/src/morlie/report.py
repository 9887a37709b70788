"""Report emission: JSON summary, CSV tables and SVG plots."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fitting import SnapshotSet  # noqa: E402
from .io import export_csv, read_table, write_assignment, write_rho, write_sg, write_table  # noqa: E402

plt.rcParams["svg.hashsalt"] = "morlie"


def to_native(obj):
    """JSON-native copy: numpy scalars and arrays become Python numbers and lists."""
    if isinstance(obj, dict):
        return {str(k): to_native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_native(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_native(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_errors(path, curves: dict) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for mode, style in (("full", "-"), ("step_ahead", "--")):
        for j, (t, e) in enumerate(curves.get(mode, [])):
            ax.plot(t, e, style, lw=0.8, color=f"C{j % 10}", label=mode if j == 0 else None)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("error (m)")
    if any(curves.get(m) for m in curves):
        ax.legend()
    _save(fig, path)


def plot_spectrum(path, s, title: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    s = np.asarray(s, float)
    pos = s[s > 0]
    if pos.size:
        ax.semilogy(np.arange(1, pos.size + 1), pos, ".-", lw=0.8)
    ax.set_xlabel("mode index")
    ax.set_ylabel("singular value")
    ax.set_title(title)
    _save(fig, path)


def plot_overlay(path, S: SnapshotSet, rom_states: np.ndarray, j: int = 0) -> None:
    """Data vs reconstruction of trajectory j at its first, middle and last snapshot."""
    K = S.times[j].size
    ks = sorted({0, K // 2, K - 1})
    fig, axes = plt.subplots(1, len(ks), figsize=(4 * len(ks), 3.5), squeeze=False)
    for ax, k in zip(axes[0], ks):
        x, y = S.states[j][k], rom_states[k]
        if S.chart_tag == "pointcloud3d":
            p, q = x.reshape(-1, 3), y.reshape(-1, 3)
            ax.scatter(p[:, 0], p[:, 1], s=6, label="data")
            ax.scatter(q[:, 0], q[:, 1], s=6, marker="x", label="reconstruction")
            ax.set_xlabel("x (m)")
            ax.set_ylabel("y (m)")
        elif S.chart_tag == "polar2d":
            ax.plot([x[0] * np.cos(x[1])], [x[0] * np.sin(x[1])], "o", label="data")
            ax.plot([y[0] * np.cos(y[1])], [y[0] * np.sin(y[1])], "x", label="reconstruction")
        else:
            ax.plot(x, label="data")
            ax.plot(y, "--", label="reconstruction")
            ax.set_xlabel("grid index")
        ax.set_title(f"t = {S.times[j][k]:.3g} s")
        ax.legend(fontsize=7)
    _save(fig, path)


def emit_report(res, outdir) -> Path:
    """Write summary.json, timings.json, CSV tables and SVG plots into outdir."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    res.summary = to_native(res.summary)
    dump_json(out / "summary.json", res.summary)
    dump_json(out / "timings.json", to_native(res.timings))
    rows = {m: [(j, t, e) for j, (ts, es) in enumerate(c) for t, e in zip(ts, es)] for m, c in res.errors.items()}
    for mode in ("full", "step_ahead"):
        write_table(out / f"errors_{mode}.csv", ["traj", "time", "error"], rows.get(mode, []))
    pod_s = res.pod.singular_values if res.pod is not None else []
    write_table(out / "pod_spectrum.csv", ["index", "sigma"], [(i + 1, v) for i, v in enumerate(pod_s)])
    sg_s = res.summary.get("subalgebra", {}).get("sg_singular_values", [])
    write_table(out / "sg_spectrum.csv", ["index", "sigma"], [(i + 1, v) for i, v in enumerate(sg_s)])
    if res.Sg is not None:
        write_sg(out / "sg.csv", res.Sg)
    if res.rho:
        seen = []
        for j, rho in enumerate(res.rho):
            if rho is not None and all(rho is not r for r in seen):
                write_rho(out / f"rho_theta_{len(seen)}.csv", rho)
                seen.append(rho)
    if res.assignment is not None:
        write_assignment(out / "assignment.csv", res.assignment)
    if res.roms and res.S is not None:
        S = res.S
        rec = SnapshotSet(S.chart_tag, S.times, tuple(r.states for r in res.roms), S.params, S.traj_ids, S.meta)
        export_csv(rec, out / "reconstruction.csv")
    if res.config.plots:
        render_plots(out, res)
    return out


def render_plots(out: Path, res=None) -> None:
    """SVG plots from in-memory results, or from the CSV tables already in `out`."""
    if res is not None:
        curves = res.errors
        pod_s = res.pod.singular_values if res.pod is not None else []
        sg_s = res.summary.get("subalgebra", {}).get("sg_singular_values", [])
    else:
        curves = {}
        for mode in ("full", "step_ahead"):
            _, rows = read_table(out / f"errors_{mode}.csv")
            per = {}
            for j, t, e in rows:
                per.setdefault(int(j), []).append((float(t), float(e)))
            curves[mode] = [tuple(np.array(v).T) for _, v in sorted(per.items())]
        pod_s = [float(r[1]) for r in read_table(out / "pod_spectrum.csv")[1]]
        sg_s = [float(r[1]) for r in read_table(out / "sg_spectrum.csv")[1]]
    plot_errors(out / "errors.svg", curves)
    plot_spectrum(out / "pod_spectrum.svg", pod_s, "snapshot matrix")
    plot_spectrum(out / "sg_spectrum.svg", sg_s, "reduced snapshot matrix")
    if res is not None and res.roms:
        plot_overlay(out / "overlay.svg", res.S, res.roms[0].states)
