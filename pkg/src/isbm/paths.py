"""Uniform-grid sample paths, Brownian simulation, and discrete integration primitives."""

from __future__ import annotations

import io
import zlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "SamplePath",
    "RngSpec",
    "make_grid",
    "simulate_bm",
    "stieltjes_integral",
    "quadratic_variation",
    "write_path_csv",
    "read_path_csv",
    "write_paths_csv",
]

_GRID_REL_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = origin + k*dt, k = 0..n."""

    origin: float
    dt: float
    n: int

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.n < 1:
            raise ValueError(f"grid needs at least one step, got n={self.n}")

    @property
    def horizon(self) -> float:
        return self.origin + self.n * self.dt

    def time(self, k: int) -> float:
        return self.origin + k * self.dt

    def times(self) -> np.ndarray:
        return self.origin + self.dt * np.arange(self.n + 1)

    def index_of(self, t: float) -> int:
        """Grid index of a time that must sit on the grid (within rounding)."""
        k = int(round((t - self.origin) / self.dt))
        if k < 0 or k > self.n or abs(self.time(k) - t) > _GRID_REL_TOL * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the grid")
        return k


def make_grid(origin: float, horizon: float, dt: float) -> TimeGrid:
    """Build the uniform grid covering [origin, horizon] with step dt.

    dt must divide the span: the final grid time has to land on the horizon
    up to floating-point rounding.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not horizon > origin:
        raise ValueError(f"horizon must exceed origin, got [{origin}, {horizon}]")
    span = horizon - origin
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > _GRID_REL_TOL * max(1.0, abs(span)):
        raise ValueError(f"dt={dt} does not divide the span {span}")
    return TimeGrid(origin=float(origin), dt=float(dt), n=n)


@dataclass(frozen=True)
class SamplePath:
    """Real-valued path sampled on a TimeGrid; values immutable, length n+1."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (self.grid.n + 1,):
            raise ValueError(f"values must have length n+1={self.grid.n + 1}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def times(self) -> np.ndarray:
        return self.grid.times()

    def with_values(self, values: np.ndarray) -> "SamplePath":
        return SamplePath(self.grid, values)


def _require_same_grid(a: SamplePath, b: SamplePath) -> None:
    if a.grid != b.grid:
        raise ValueError(f"paths live on different grids: {a.grid} vs {b.grid}")


@dataclass(frozen=True)
class RngSpec:
    """Label for a reproducible random stream.

    Streams are keyed by (master_seed, purpose, path_index, *extra) through a
    counter-based generator, so draws do not depend on evaluation order or
    thread count.
    """

    master_seed: int
    path_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.path_index < 0:
            raise ValueError("path_index must be nonnegative")

    def with_path(self, path_index: int) -> "RngSpec":
        return RngSpec(self.master_seed, path_index)

    def generator(self, purpose: str, *extra: int) -> np.random.Generator:
        tag = zlib.crc32(purpose.encode("utf-8"))
        seq = np.random.SeedSequence(
            entropy=(self.master_seed, tag, self.path_index, *map(int, extra))
        )
        return np.random.Generator(np.random.Philox(seq))


def simulate_bm(grid: TimeGrid, rng: RngSpec, x0: float = 0.0) -> SamplePath:
    """Brownian path on the grid: x0 plus i.i.d. N(0, dt) increments."""
    gen = rng.generator("bm")
    increments = gen.standard_normal(grid.n) * np.sqrt(grid.dt)
    values = np.empty(grid.n + 1)
    values[0] = x0
    values[1:] = x0 + np.cumsum(increments)
    return SamplePath(grid, values)


def stieltjes_integral(integrand: SamplePath, integrator: SamplePath) -> SamplePath:
    """Left-point discrete Stieltjes integral, out(k) = sum_{j<k} f_j (Y_{j+1}-Y_j)."""
    _require_same_grid(integrand, integrator)
    out = np.empty(integrand.grid.n + 1)
    out[0] = 0.0
    out[1:] = np.cumsum(integrand.values[:-1] * np.diff(integrator.values))
    return SamplePath(integrand.grid, out)


def quadratic_variation(path: SamplePath) -> SamplePath:
    """Running sum of squared increments."""
    out = np.empty(path.grid.n + 1)
    out[0] = 0.0
    out[1:] = np.cumsum(np.diff(path.values) ** 2)
    return SamplePath(path.grid, out)


def _fmt(x: float) -> str:
    # repr of a float is the shortest string that round-trips exactly
    return repr(float(x))


def write_path_csv(path: SamplePath, stream) -> None:
    """Write `t,value` rows, one per grid point, losslessly."""
    stream.write("t,value\n")
    for t, v in zip(path.times(), path.values):
        stream.write(f"{_fmt(t)},{_fmt(v)}\n")


def write_paths_csv(paths: list, stream) -> None:
    """Write one or more paths sharing a grid; wide format for more than one."""
    if not paths:
        raise ValueError("no paths to write")
    for p in paths[1:]:
        _require_same_grid(paths[0], p)
    if len(paths) == 1:
        write_path_csv(paths[0], stream)
        return
    header = "t," + ",".join(f"value_{i}" for i in range(len(paths)))
    stream.write(header + "\n")
    for k, t in enumerate(paths[0].times()):
        row = ",".join(_fmt(p.values[k]) for p in paths)
        stream.write(f"{_fmt(t)},{row}\n")


def read_path_csv(stream) -> SamplePath:
    """Read a single-path CSV written by write_path_csv."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline().strip()
    if header != "t,value":
        raise ValueError(f"unexpected CSV header {header!r}")
    ts, vs = [], []
    for line in stream:
        line = line.strip()
        if not line:
            continue
        t_str, v_str = line.split(",")
        ts.append(float(t_str))
        vs.append(float(v_str))
    if len(ts) < 2:
        raise ValueError("path CSV needs at least two rows")
    ts_arr = np.asarray(ts)
    dts = np.diff(ts_arr)
    dt = float(dts[0])
    if np.any(np.abs(dts - dt) > _GRID_REL_TOL * max(1.0, abs(ts_arr[-1]))):
        raise ValueError("path CSV times are not uniformly spaced")
    grid = TimeGrid(origin=float(ts_arr[0]), dt=dt, n=len(ts) - 1)
    return SamplePath(grid, np.asarray(vs))
