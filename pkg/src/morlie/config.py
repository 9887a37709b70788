"""Run configuration: one flat set of keys shared by config files and CLI flags."""
from __future__ import annotations

import os
import types
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields, replace

from .datagen import BenchmarkConfig

FIT_MODES = ("velocity_based", "velocity_free", "both")
ACTIONS = ("auto", "affine_cloud", "clustered_affine", "grid_translation", "so2_polar")


@dataclass(frozen=True)
class RunConfig:
    # data: generate a benchmark family, or ingest a snapshot CSV
    family: str = "rigid"
    input: str | None = None
    seed: int = 0
    bench: dict = field(default_factory=dict)  # further BenchmarkConfig fields
    # reduction
    action: str = "auto"
    fit_mode: str = "velocity_free"
    energy_fraction: float = 0.99
    closure_tol: float = 1e-8
    cluster: bool | None = None  # None: cluster only the sheering family
    n_neighbors: int = 8
    residual_tol: float = 0.15
    cluster_window: int = 200
    n_segments: int = 100
    stride: int = 10
    integrator: str = "rkmk4"
    # evaluation
    width: bool = False
    width_horizon: float | None = None
    plots: bool = True
    workers: int = 1
    output: str = "morlie_out"

    def __post_init__(self):
        if self.fit_mode not in FIT_MODES:
            raise ValueError(f"fit_mode must be one of {FIT_MODES}")
        if self.action not in ACTIONS:
            raise ValueError(f"action must be one of {ACTIONS}")
        if not 0 < self.energy_fraction < 1:
            raise ValueError("energy_fraction must lie in (0, 1)")
        if self.integrator not in ("rkmk4", "lie_euler"):
            raise ValueError("integrator must be rkmk4 or lie_euler")
        if self.n_segments < 1 or self.stride < 1 or self.workers < 1:
            raise ValueError("n_segments, stride and workers must be positive")
        if self.input is not None and not os.path.exists(self.input):
            raise ValueError(f"input file {self.input!r} does not exist")
        bad = set(self.bench) - set(BENCH_KEYS)
        if bad:
            raise ValueError(f"unknown benchmark keys {sorted(bad)}")

    def benchmark(self) -> BenchmarkConfig:
        return BenchmarkConfig(family=self.family, rng_seed=self.seed, **self.bench)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output")
        d.pop("workers")
        return d

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


BENCH_KEYS = tuple(f.name for f in fields(BenchmarkConfig) if f.name not in ("family", "rng_seed"))
RUN_KEYS = tuple(f.name for f in fields(RunConfig) if f.name != "bench")


def _coerce(value: str, hint):
    origin = typing.get_origin(hint)
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    if value.lower() in ("none", "") and type(None) in typing.get_args(hint):
        return None
    if origin in (typing.Union, types.UnionType) and args:
        return _coerce(value, args[0])
    if hint is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if hint is int:
        return int(value)
    if hint is float:
        return float(value)
    if hint is tuple or origin is tuple:
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            return tuple(int(v) for v in items)
        except ValueError:
            return tuple(float(v) for v in items)
    return value


def from_mapping(values: dict[str, str]) -> RunConfig:
    """Build a RunConfig from string key/values (config file and CLI flags)."""
    run_h, bench_h = _hints(RunConfig), _hints(BenchmarkConfig)
    kw, bench = {}, {}
    for key, raw in values.items():
        key = key.replace("-", "_")
        if key in RUN_KEYS:
            kw[key] = _coerce(str(raw), run_h[key])
        elif key in BENCH_KEYS:
            bench[key] = _coerce(str(raw), bench_h[key])
        elif key == "config":
            continue
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    return RunConfig(bench=bench, **kw)


def default_value(key: str):
    for f in fields(RunConfig):
        if f.name == key:
            return None if f.default is MISSING else f.default
    for f in fields(BenchmarkConfig):
        if f.name == key:
            return f.default
    raise KeyError(key)


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("MORLIE_WORKERS")
    return max(1, int(raw)) if raw else default
