"""File formats: long-format snapshot CSV, truth sidecar, coefficient CSVs, config files."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .fitting import ReducedSnapshotMatrix, ReducedVectorField, SnapshotSet
from .lie_core import AlgebraBasis

SNAPSHOT_MAGIC = "#morlie-snapshots v1"
TRUTH_MAGIC = "#morlie-truth v1"
COLUMNS = {
    "pointcloud3d": "traj,time,particle,x,y,z",
    "grid1d": "traj,time,index,u",
    "polar2d": "traj,time,q1,q2",
}
_CHART_OF = {v: k for k, v in COLUMNS.items()}


class ParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- snapshots ---------------------------------------------------------------------------

def export_csv(S: SnapshotSet, path) -> None:
    """Write S in the long format; parameters and chart metadata go in `#` lines."""
    lines = [SNAPSHOT_MAGIC]
    for k, v in sorted(S.meta.items()):
        lines.append(f"#meta,{k},{fmt(v)}")
    for tid, p in zip(S.traj_ids, S.params):
        if p.size:
            lines.append(",".join(["#param", str(tid)] + [fmt(v) for v in p]))
    lines.append(COLUMNS[S.chart_tag])
    for j, tid in enumerate(S.traj_ids):
        for t, x in zip(S.times[j], S.states[j]):
            ts = fmt(t)
            if S.chart_tag == "pointcloud3d":
                for i, p in enumerate(x.reshape(-1, 3)):
                    lines.append(f"{tid},{ts},{i},{fmt(p[0])},{fmt(p[1])},{fmt(p[2])}")
            elif S.chart_tag == "grid1d":
                lines.extend(f"{tid},{ts},{i},{fmt(u)}" for i, u in enumerate(x))
            else:
                lines.append(f"{tid},{ts},{fmt(x[0])},{fmt(x[1])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def ingest_csv(path) -> SnapshotSet:
    """Read and validate a long-format snapshot file.

    Rows are sorted by (traj, time, particle); every (traj, time) must carry
    the same particle / grid indices 0..N-1.
    """
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != SNAPSHOT_MAGIC:
        raise ParseError(path, 1, f"missing header {SNAPSHOT_MAGIC!r}")
    meta, params = {}, {}
    n = 1
    while n < len(text) and text[n].startswith("#"):
        parts = text[n].split(",")
        try:
            if parts[0] == "#meta":
                meta[parts[1]] = float(parts[2])
            elif parts[0] == "#param":
                params[int(parts[1])] = np.array([float(v) for v in parts[2:]])
        except (IndexError, ValueError):
            raise ParseError(path, n + 1, "malformed metadata line") from None
        n += 1
    if n >= len(text):
        raise ParseError(path, n + 1, "missing column header")
    chart = _CHART_OF.get(text[n].strip())
    if chart is None:
        raise ParseError(path, n + 1, f"unknown column header {text[n].strip()!r}")
    ncol = len(COLUMNS[chart].split(","))
    rows = []
    for ln, line in enumerate(text[n + 1:], start=n + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != ncol:
            raise ParseError(path, ln, f"expected {ncol} fields, got {len(parts)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            raise ParseError(path, ln, "non-numeric field") from None
        if not np.all(np.isfinite(vals)):
            raise ParseError(path, ln, "NaN or Inf value")
        if vals[0] != int(vals[0]) or (chart != "polar2d" and vals[2] != int(vals[2])):
            raise ParseError(path, ln, "traj and particle/index must be integers")
        rows.append((ln, vals))
    if not rows:
        raise ValueError(f"{path}: empty snapshot set")
    return _assemble(path, chart, rows, meta, params)


def _assemble(path, chart, rows, meta, params) -> SnapshotSet:
    key = (lambda r: (r[1][0], r[1][1], r[1][2])) if chart != "polar2d" else (lambda r: (r[1][0], r[1][1]))
    rows = sorted(rows, key=key)
    trajs: dict[int, dict[float, list]] = {}
    for ln, v in rows:
        trajs.setdefault(int(v[0]), {}).setdefault(v[1], []).append((ln, v))
    times, states, ids = [], [], []
    width = None
    for tid, by_time in trajs.items():
        t = np.array(sorted(by_time))
        xs = []
        for tk in t:
            recs = by_time[tk]
            if chart == "polar2d":
                if len(recs) != 1:
                    raise ParseError(path, recs[1][0], f"duplicate snapshot for traj {tid} at t={tk}")
                x = np.array(recs[0][1][2:])
            else:
                idx = [int(r[1][2]) for r in recs]
                if idx != list(range(len(idx))):
                    raise ParseError(path, recs[0][0], f"traj {tid}, t={tk}: indices must be 0..N-1 without gaps")
                x = np.array([r[1][3:] for r in recs]).ravel()
            if width is None:
                width = x.size
            elif x.size != width:
                raise ParseError(path, recs[0][0], "all snapshots must have the same size")
            xs.append(x)
        times.append(t)
        states.append(np.array(xs))
        ids.append(tid)
    par = tuple(params.get(i, np.zeros(0)) for i in ids)
    return SnapshotSet(chart, tuple(times), tuple(states), par, tuple(ids), meta)


# -- truth sidecar --------------------------------------------------------------------

def write_truth(path, times, group_path, assignment=None) -> None:
    g = np.asarray(group_path, float)
    n = g.shape[-1]
    lines = [TRUTH_MAGIC, f"#n,{n}"]
    if assignment is not None:
        lines.append(",".join(["#assignment"] + [str(int(a)) for a in assignment]))
    lines.append("time," + ",".join(f"g{i}{j}" for i in range(n) for j in range(n)))
    lines.extend(",".join([fmt(t)] + [fmt(v) for v in m.ravel()]) for t, m in zip(times, g))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth(path):
    """(times, group_path, assignment or None)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != TRUTH_MAGIC:
        raise ParseError(path, 1, f"missing header {TRUTH_MAGIC!r}")
    n, assignment, i = None, None, 1
    while text[i].startswith("#"):
        parts = text[i].split(",")
        if parts[0] == "#n":
            n = int(parts[1])
        elif parts[0] == "#assignment":
            assignment = np.array([int(a) for a in parts[1:]])
        i += 1
    data = np.array([[float(v) for v in line.split(",")] for line in text[i + 1:] if line.strip()])
    data = data.reshape(-1, 1 + n * n)
    return data[:, 0], data[:, 1:].reshape(-1, n, n), assignment


# -- coefficient tables -----------------------------------------------------------------

def _basis_lines(basis: AlgebraBasis) -> list[str]:
    n = basis.ambient_dim
    out = [f"#basis,{basis.dim},{n}"]
    for e in basis.elements:
        out.append(",".join(["#e"] + [fmt(v) for v in e.ravel()]))
    return out


def _read_basis(lines: list[str]) -> AlgebraBasis:
    head = next(l for l in lines if l.startswith("#basis")).split(",")
    k, n = int(head[1]), int(head[2])
    els = [np.array([float(v) for v in l.split(",")[1:]]).reshape(n, n) for l in lines if l.startswith("#e,")]
    return AlgebraBasis(np.array(els).reshape(k, n, n))


def write_sg(path, Sg: ReducedSnapshotMatrix) -> None:
    lines = ["#morlie-sg v1", f"#t_end,{fmt(Sg.t_end)}"] + _basis_lines(Sg.basis)
    lines.append("traj,step,time," + ",".join(f"c{i}" for i in range(Sg.basis.dim)) + ",cost")
    costs = Sg.costs if Sg.costs is not None else np.full(Sg.n_columns, np.nan)
    for tid, k, t, c, cost in zip(Sg.traj_ids, Sg.steps, Sg.times, Sg.coeffs, costs):
        lines.append(",".join([str(tid), str(k), fmt(t)] + [fmt(v) for v in c] + [fmt(cost)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sg(path) -> ReducedSnapshotMatrix:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    head = [l for l in text if l.startswith("#")]
    t_end = float(next(l for l in head if l.startswith("#t_end")).split(",")[1])
    basis = _read_basis(head)
    body = [l for l in text if l and not l.startswith("#")][1:]
    data = np.array([[float(v) for v in l.split(",")] for l in body]).reshape(-1, 4 + basis.dim)
    costs = data[:, -1]
    return ReducedSnapshotMatrix(
        data[:, 3:-1], data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2], basis, t_end,
        None if np.all(np.isnan(costs)) else costs,
    )


def write_rho(path, rho: ReducedVectorField) -> None:
    d = rho.basis.dim
    lines = ["#morlie-rho v1", f"#rmse,{fmt(rho.rmse)}"] + _basis_lines(rho.basis)
    lines.append("time," + ",".join(f"c{i}" for i in range(d)) + "," + ",".join(f"dc{i}" for i in range(d)))
    for t, v, s in zip(rho.knots, rho.values, rho.slopes):
        lines.append(",".join([fmt(t)] + [fmt(x) for x in v] + [fmt(x) for x in s]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_rho(path) -> ReducedVectorField:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    head = [l for l in text if l.startswith("#")]
    basis = _read_basis(head)
    rmse = float(next(l for l in head if l.startswith("#rmse")).split(",")[1])
    body = [l for l in text if l and not l.startswith("#")][1:]
    data = np.array([[float(v) for v in l.split(",")] for l in body])
    d = basis.dim
    return ReducedVectorField(basis, data[:, 0], data[:, 1:1 + d], data[:, 1 + d:], rmse)


def write_table(path, header: list[str], rows) -> None:
    """Plain CSV; an empty `rows` gives a header-only file."""
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else fmt(v))
                              for v in r))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    return text[0].split(","), [l.split(",") for l in text[1:] if l]


def write_assignment(path, assignment) -> None:
    write_table(path, ["particle_id", "cluster"], [(i, int(c)) for i, c in enumerate(assignment)])


def read_assignment(path) -> np.ndarray:
    _, rows = read_table(path)
    out = np.empty(len(rows), int)
    for pid, c in rows:
        out[int(pid)] = int(c)
    return out


# -- config files ---------------------------------------------------------------------

def parse_config(path) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment."""
    out = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(path, ln, "expected `key = value`")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ParseError(path, ln, "empty key")
        out[k.replace("-", "_")] = v
    return out
