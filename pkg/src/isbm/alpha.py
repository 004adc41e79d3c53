"""Piecewise-constant skewness functions, discretization, and text formats."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "AlphaStep",
    "AlphaLike",
    "discretize_alpha",
    "shift_alpha",
    "parse_alpha_inline",
    "format_alpha_inline",
    "load_alpha_csv",
    "save_alpha_csv",
]


@dataclass(frozen=True, eq=False)
class AlphaStep:
    """Right-continuous step function on [0, inf) with values in [0, 1].

    starts[0] must be 0; the value on [starts[i], starts[i+1]) is values[i],
    and the last value extends beyond the last breakpoint.
    """

    starts: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s = np.array(self.starts, dtype=np.float64, copy=True)
        v = np.array(self.values, dtype=np.float64, copy=True)
        if s.ndim != 1 or s.shape != v.shape or s.size == 0:
            raise ValueError("starts and values must be equal-length nonempty 1-d arrays")
        if s[0] != 0.0:
            raise ValueError(f"first breakpoint must be 0, got {s[0]}")
        if np.any(np.diff(s) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any((v < 0.0) | (v > 1.0)) or not np.all(np.isfinite(v)):
            raise ValueError("alpha values must lie in [0, 1]")
        s.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "starts", s)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float) -> "AlphaStep":
        return cls(np.array([0.0]), np.array([float(value)]))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.starts, t_arr, side="right") - 1, 0, self.values.size - 1)
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    def interval_index(self, t: float) -> int:
        return int(np.clip(np.searchsorted(self.starts, t, side="right") - 1, 0, self.values.size - 1))

    def breakpoints_within(self, lo: float, hi: float) -> np.ndarray:
        """Breakpoints strictly inside (lo, hi)."""
        inside = (self.starts > lo) & (self.starts < hi)
        return self.starts[inside]

    def equals(self, other: "AlphaStep") -> bool:
        return (
            self.starts.shape == other.starts.shape
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.values, other.values)
        )


AlphaLike = Union[AlphaStep, Callable[[float], float]]


def discretize_alpha(spec: AlphaLike, n: int, horizon: float = 1.0) -> AlphaStep:
    """Left-endpoint sampling of spec on the uniform n-piece partition of [0, horizon]."""
    if n < 1:
        raise ValueError(f"need n >= 1 pieces, got {n}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    starts = horizon * np.arange(n) / n
    vals = np.array([float(spec(t)) for t in starts])
    if np.any((vals < 0.0) | (vals > 1.0)) or not np.all(np.isfinite(vals)):
        bad = starts[np.argmax((vals < 0.0) | (vals > 1.0) | ~np.isfinite(vals))]
        raise ValueError(f"alpha evaluation at t={bad} falls outside [0, 1]")
    return AlphaStep(starts, vals)


def shift_alpha(alpha: AlphaStep, s: float) -> AlphaStep:
    """The step function u -> alpha(s + u)."""
    if s < 0:
        raise ValueError(f"shift must be nonnegative, got {s}")
    if s == 0.0:
        return alpha
    keep = alpha.starts > s
    starts = np.concatenate([[0.0], alpha.starts[keep] - s])
    values = np.concatenate([[alpha(s)], alpha.values[keep]])
    return AlphaStep(starts, values)


def parse_alpha_inline(text: str) -> AlphaStep:
    """Parse the inline grammar `t0:a0,t1:a1,...` with t0 = 0 and increasing t."""
    pairs = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            raise ValueError(f"empty token in alpha spec {text!r}")
        parts = token.split(":")
        if len(parts) != 2:
            raise ValueError(f"malformed alpha token {token!r} (expected t:value)")
        try:
            t = float(parts[0])
            a = float(parts[1])
        except ValueError:
            raise ValueError(f"malformed alpha token {token!r} (non-numeric)") from None
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha token {token!r} has value outside [0, 1]")
        pairs.append((t, a))
    if pairs[0][0] != 0.0:
        raise ValueError(f"alpha spec {text!r} must start at t=0")
    starts = np.array([p[0] for p in pairs])
    values = np.array([p[1] for p in pairs])
    if np.any(np.diff(starts) <= 0.0):
        raise ValueError(f"alpha spec {text!r} has non-increasing breakpoints")
    return AlphaStep(starts, values)


def format_alpha_inline(alpha: AlphaStep) -> str:
    return ",".join(f"{repr(float(t))}:{repr(float(a))}" for t, a in zip(alpha.starts, alpha.values))


def save_alpha_csv(alpha: AlphaStep, stream) -> None:
    stream.write("t,alpha\n")
    for t, a in zip(alpha.starts, alpha.values):
        stream.write(f"{repr(float(t))},{repr(float(a))}\n")


def load_alpha_csv(stream) -> AlphaStep:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline().strip()
    if header != "t,alpha":
        raise ValueError(f"unexpected alpha CSV header {header!r}")
    ts, vs = [], []
    for line in stream:
        line = line.strip()
        if not line:
            continue
        t_str, a_str = line.split(",")
        ts.append(float(t_str))
        vs.append(float(a_str))
    if not ts:
        raise ValueError("alpha CSV has no rows")
    if ts[0] != 0.0:
        raise ValueError("alpha CSV must start at t=0")
    return AlphaStep(np.asarray(ts), np.asarray(vs))
