"""Zero-set and excursion decomposition of grid paths.

A grid point is a zero when its value is exactly 0; a sign change between
consecutive grid points contributes an interpolated zero at the linear
crossing time. Excursions are the maximal intervals between consecutive
zero events with nonzero interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import SamplePath, TimeGrid

__all__ = ["Excursion", "ExcursionSet", "decompose_excursions"]


@dataclass(frozen=True)
class Excursion:
    start: float
    end: float
    sign: int
    complete: bool


@dataclass(frozen=True, eq=False)
class ExcursionSet:
    """Excursion intervals of a path, plus per-grid-point membership.

    index_of_point maps each grid point to the excursion containing it,
    or -1 on the zero set. first_index/last_index bracket the grid points
    inside each excursion.
    """

    grid: TimeGrid
    starts: np.ndarray
    ends: np.ndarray
    signs: np.ndarray
    complete: np.ndarray
    first_index: np.ndarray
    last_index: np.ndarray
    index_of_point: np.ndarray

    def __len__(self) -> int:
        return int(self.starts.size)

    def intervals(self) -> list:
        return [
            Excursion(float(g), float(d), int(s), bool(c))
            for g, d, s, c in zip(self.starts, self.ends, self.signs, self.complete)
        ]

    def gamma(self) -> np.ndarray:
        """Last-zero time per grid point: the excursion start inside an
        excursion, the point's own time on the zero set."""
        times = self.grid.times()
        out = times.copy()
        inside = self.index_of_point >= 0
        out[inside] = self.starts[self.index_of_point[inside]]
        return out


def _run_structure(values: np.ndarray):
    """Boolean masks describing maximal same-sign runs of nonzero grid points."""
    nonzero = values != 0.0
    sign = np.sign(values)
    prev_zero = np.empty(values.shape, dtype=bool)
    prev_zero[0] = True
    prev_zero[1:] = ~nonzero[:-1]
    sign_flip = np.empty(values.shape, dtype=bool)
    sign_flip[0] = False
    sign_flip[1:] = sign[1:] * sign[:-1] < 0
    new_run = nonzero & (prev_zero | sign_flip)
    return nonzero, new_run


def _crossing_time(t_left: float, dt: float, v_left: float, v_right: float) -> float:
    return t_left + dt * abs(v_left) / (abs(v_left) + abs(v_right))


def decompose_excursions(path: SamplePath) -> ExcursionSet:
    v = path.values
    grid = path.grid
    times = grid.times()
    nonzero, new_run = _run_structure(v)

    index_of_point = np.cumsum(new_run) - 1
    index_of_point = np.where(nonzero, index_of_point, -1)

    first = np.flatnonzero(new_run)
    n_exc = first.size
    if n_exc == 0:
        empty_f = np.empty(0, dtype=np.int64)
        return ExcursionSet(
            grid=grid,
            starts=np.empty(0),
            ends=np.empty(0),
            signs=np.empty(0, dtype=np.int64),
            complete=np.empty(0, dtype=bool),
            first_index=empty_f,
            last_index=empty_f,
            index_of_point=index_of_point.astype(np.int64),
        )

    last = np.empty(n_exc, dtype=np.int64)
    last[:-1] = first[1:] - 1
    last[-1] = grid.n
    # trailing zero points after the final run are not part of it
    while v[last[-1]] == 0.0:
        last[-1] -= 1
    # runs are separated either by zero grid points or by sign changes;
    # when separated by a sign change alone, adjacent runs abut, so the
    # last point of the earlier run is the point before the next first
    for j in range(n_exc - 1):
        while v[last[j]] == 0.0:
            last[j] -= 1

    starts = np.empty(n_exc)
    ends = np.empty(n_exc)
    complete = np.ones(n_exc, dtype=bool)
    for j in range(n_exc):
        i0 = first[j]
        if i0 == 0:
            starts[j] = times[0]
        elif v[i0 - 1] == 0.0:
            starts[j] = times[i0 - 1]
        else:
            starts[j] = _crossing_time(times[i0 - 1], grid.dt, v[i0 - 1], v[i0])
        i1 = last[j]
        if i1 == grid.n:
            ends[j] = times[grid.n]
            complete[j] = False
        elif v[i1 + 1] == 0.0:
            ends[j] = times[i1 + 1]
        else:
            ends[j] = _crossing_time(times[i1], grid.dt, v[i1], v[i1 + 1])

    signs = np.sign(v[first]).astype(np.int64)
    return ExcursionSet(
        grid=grid,
        starts=starts,
        ends=ends,
        signs=signs,
        complete=complete,
        first_index=first.astype(np.int64),
        last_index=last,
        index_of_point=index_of_point.astype(np.int64),
    )
