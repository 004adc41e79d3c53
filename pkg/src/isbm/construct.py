"""Excursion sign flipping: the constructive route to skew Brownian paths.

Signs are Bernoulli per excursion, with success probability given by the
skewness function evaluated at the excursion start. The sign is constant
over the whole excursion, the step process Z vanishes on the zero set, and
X = Z * |B| keeps |X| = |B| bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alpha import AlphaLike
from .excursions import ExcursionSet, decompose_excursions
from .localtime import LocalTimeCurve
from .paths import RngSpec, SamplePath, stieltjes_integral

__all__ = [
    "SignAssignment",
    "SigmaDecomposition",
    "assign_signs",
    "draw_signs",
    "construct_isbm",
    "unfold_submartingale",
    "balayage_residual",
    "skew_identity_residual",
    "sde_residual",
]


@dataclass(frozen=True, eq=False)
class SignAssignment:
    """Per-excursion uniforms and signs, plus the induced step path Z.

    Z equals the excursion's sign strictly inside it and 0 on the zero set.
    When the path starts away from zero, the leading segment keeps the path's
    own sign and consumes no Bernoulli draw (forced_first).
    """

    excursions: ExcursionSet
    uniforms: np.ndarray
    alpha_at_start: np.ndarray
    signs: np.ndarray
    forced_first: bool
    z: SamplePath


def assign_signs(excursions: ExcursionSet, alpha: AlphaLike, uniforms: np.ndarray) -> SignAssignment:
    """Deterministic sign assignment from explicit per-excursion uniforms."""
    n_exc = len(excursions)
    u = np.asarray(uniforms, dtype=np.float64)
    if u.shape != (n_exc,):
        raise ValueError(f"need one uniform per excursion ({n_exc}), got shape {u.shape}")
    if n_exc:
        a_g = np.asarray(alpha(excursions.starts), dtype=np.float64)
    else:
        a_g = np.empty(0)
    if np.any((a_g < 0.0) | (a_g > 1.0)) or not np.all(np.isfinite(a_g)):
        raise ValueError("alpha evaluations at excursion starts fall outside [0, 1]")
    signs = np.where(u < a_g, 1, -1).astype(np.int64)

    forced = False
    if n_exc and excursions.first_index[0] == 0:
        # path begins inside an excursion: keep its sign, no draw
        signs = signs.copy()
        signs[0] = excursions.signs[0]
        forced = True

    z_values = np.zeros(excursions.grid.n + 1)
    inside = excursions.index_of_point >= 0
    z_values[inside] = signs[excursions.index_of_point[inside]]
    return SignAssignment(
        excursions=excursions,
        uniforms=u,
        alpha_at_start=a_g,
        signs=signs,
        forced_first=forced,
        z=SamplePath(excursions.grid, z_values),
    )


def draw_signs(excursions: ExcursionSet, alpha: AlphaLike, rng: RngSpec) -> SignAssignment:
    """Bernoulli signs from the rng's sign stream: one uniform per excursion,
    in excursion order, so a fixed (seed, path) reuses identical uniforms for
    every skewness function."""
    uniforms = rng.generator("signs").random(len(excursions))
    return assign_signs(excursions, alpha, uniforms)


def construct_isbm(bm: SamplePath, alpha: AlphaLike, rng: RngSpec):
    """Skew path from a Brownian driver: X = Z * |B| with excursion signs.

    Returns (X, SignAssignment). Drivers starting away from zero keep their
    initial sign until the first zero event.
    """
    excursions = decompose_excursions(bm)
    assignment = draw_signs(excursions, alpha, rng)
    x_values = assignment.z.values * np.abs(bm.values)
    return SamplePath(bm.grid, x_values), assignment


@dataclass(frozen=True, eq=False)
class SigmaDecomposition:
    """Nonnegative path x split as martingale part plus increasing part.

    The increasing part may only grow on steps whose endpoints dip into
    [0, zero_tol]; x = martingale + increasing must hold within atol
    (estimated increasing parts carry estimation error).
    """

    x: SamplePath
    martingale: SamplePath
    increasing: SamplePath
    zero_tol: float
    atol: float = 1e-9

    def __post_init__(self):
        if self.x.grid != self.martingale.grid or self.x.grid != self.increasing.grid:
            raise ValueError("decomposition parts live on different grids")
        xv, nv, av = self.x.values, self.martingale.values, self.increasing.values
        if np.min(xv) < 0.0:
            raise ValueError("x must be nonnegative")
        if abs(av[0]) > self.atol:
            raise ValueError(f"increasing part must start at 0, got {av[0]}")
        da = np.diff(av)
        if np.min(da) < -1e-12:
            raise ValueError("increasing part must be nondecreasing")
        gap = np.max(np.abs(xv - nv - av))
        if gap > self.atol:
            raise ValueError(f"x - (martingale + increasing) reaches {gap}, above atol={self.atol}")
        off_zero = np.minimum(xv[:-1], xv[1:]) > self.zero_tol
        bad = off_zero & (da > 1e-12)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ValueError(
                f"increasing part grows by {da[k]} on step {k} where min(x) > zero_tol={self.zero_tol}"
            )


def unfold_submartingale(sigma: SigmaDecomposition, rng: RngSpec) -> SamplePath:
    """Signed path M with |M| = x, flipping a fair coin between growth points
    of the increasing part (the zero visits of x at grid resolution)."""
    da = np.diff(sigma.increasing.values)
    growth = da > 1e-12
    segment = np.empty(sigma.x.grid.n + 1, dtype=np.int64)
    segment[0] = 0
    segment[1:] = np.cumsum(growth)
    n_segments = int(segment[-1]) + 1
    u = rng.generator("unfold").random(n_segments)
    signs = np.where(u < 0.5, 1.0, -1.0)
    return SamplePath(sigma.x.grid, signs[segment] * sigma.x.values)


def _excursion_value_of_k(k_path: SamplePath, excursions: ExcursionSet) -> np.ndarray:
    """Value of k on each excursion; errors if k varies inside one."""
    kv = k_path.values
    out = np.empty(len(excursions))
    for j in range(len(excursions)):
        seg = kv[excursions.first_index[j] : excursions.last_index[j] + 1]
        if np.any(seg != seg[0]):
            raise ValueError(f"k varies inside excursion {j} on [{excursions.starts[j]}, {excursions.ends[j]}]")
        out[j] = seg[0]
    return out


def balayage_residual(k_path: SamplePath, y: SamplePath) -> SamplePath:
    """R(t) = k_{gamma(t)} y(t) - k(0) y(0) - int_0^t k dy with the left-point rule.

    k must be constant on each excursion of y; off the zero set the residual
    increments telescope to exact zeros.
    """
    if k_path.grid != y.grid:
        raise ValueError("k and y live on different grids")
    excursions = decompose_excursions(y)
    k_exc = _excursion_value_of_k(k_path, excursions)
    k_gamma = k_path.values.copy()
    inside = excursions.index_of_point >= 0
    k_gamma[inside] = k_exc[excursions.index_of_point[inside]]
    integral = stieltjes_integral(k_path, y).values
    r = k_gamma * y.values - k_path.values[0] * y.values[0] - integral
    return SamplePath(y.grid, r)


def _weighted_local_time_integral(alpha: AlphaLike, curve: LocalTimeCurve) -> np.ndarray:
    """Cumulative int (2 alpha - 1) dL over the grid, left-point weights."""
    t_left = curve.grid.times()[:-1]
    weights = 2.0 * np.asarray(alpha(t_left), dtype=np.float64) - 1.0
    out = np.empty(curve.grid.n + 1)
    out[0] = 0.0
    out[1:] = np.cumsum(weights * np.diff(curve.values))
    return out


def skew_identity_residual(
    signs: SignAssignment, y: SamplePath, alpha: AlphaLike, local_time: LocalTimeCurve
) -> float:
    """Sup-norm defect of Z|y| = int Z d|y| + int (2 alpha - 1) dL over the grid.

    y is the driver whose excursions produced the signs; its magnitude is the
    reflected path entering the identity. L must estimate the symmetric local
    time of the same driver.

    The integrand of int Z d|y| vanishes on the zero set, where all of the
    magnitude's local-time rise lives. A step straddling a zero event
    therefore contributes only its martingale travel -(|y_j| + |y_{j+1}|)
    (down to the zero event, with the reflection rise excluded); summing raw
    magnitude increments instead would hand the skew term's local time to the
    integral and void the check. Within one excursion the raw increment is
    the martingale increment.
    """
    if y.grid != signs.z.grid or y.grid != local_time.grid:
        raise ValueError("signs, path and local-time curve must share one grid")
    magnitude = np.abs(y.values)
    z = signs.z.values
    excursions = signs.excursions
    same_excursion = (
        (excursions.index_of_point[:-1] == excursions.index_of_point[1:])
        & (excursions.index_of_point[:-1] >= 0)
    )
    martingale_increment = np.where(
        same_excursion, np.diff(magnitude), -(magnitude[:-1] + magnitude[1:])
    )
    integral = np.empty(y.grid.n + 1)
    integral[0] = 0.0
    integral[1:] = np.cumsum(z[:-1] * martingale_increment)
    skew_term = _weighted_local_time_integral(alpha, local_time)
    defect = z * magnitude - magnitude[0] * z[0] - integral - skew_term
    return float(np.max(np.abs(defect)))


def sde_residual(
    x: SamplePath,
    b: SamplePath,
    alpha: AlphaLike,
    local_time: LocalTimeCurve,
    x0: float = 0.0,
    qv_band: float = 0.05,
) -> float:
    """Sup-norm defect of X = x0 + W + int (2 alpha - 1) dL, reconstructing the
    driving noise as W = int sgn(X) sgn(B) dB.

    Also verifies the reconstruction is Brownian-like: its quadratic variation
    over the span must land within qv_band of the span length.
    """
    if x.grid != b.grid or x.grid != local_time.grid:
        raise ValueError("x, b and local-time curve must share one grid")
    integrand = np.sign(x.values) * np.sign(b.values)
    w = np.empty(x.grid.n + 1)
    w[0] = 0.0
    w[1:] = np.cumsum(integrand[:-1] * np.diff(b.values))
    span = x.grid.n * x.grid.dt
    qv = float(np.sum(np.diff(w) ** 2))
    if abs(qv - span) > qv_band * span:
        raise ValueError(
            f"reconstructed driver has quadratic variation {qv:.6g}, "
            f"outside {span:.6g} +/- {qv_band:.0%}"
        )
    skew_term = _weighted_local_time_integral(alpha, local_time)
    defect = x.values - x0 - w - skew_term
    return float(np.max(np.abs(defect)))
