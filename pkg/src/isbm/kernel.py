"""Transition-kernel quadrature for the skew construction.

The kernel is a Gaussian no-crossing part plus a crossing integral over the
time u spent before the last zero. The crossing integrand carries a 1/sqrt(u)
singularity at u = 0 and a (tau-u)^{-3/2} blow-up against a vanishing
exponential at u = tau; the first is removed by u = v^2, the second by
q = |y|/sqrt(tau-u), which turns the boundary layer into a Gaussian tail.
Between those endpoints the integral is split at the breakpoints of the
shifted skewness function, where the integrand has jumps.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, pi, sqrt

import numpy as np
from scipy.integrate import quad

from .alpha import AlphaStep

__all__ = [
    "KernelQuery",
    "QuadratureError",
    "transition_density",
    "constant_alpha_density",
    "density_normalization",
    "chapman_kolmogorov_residual",
    "conditional_mean",
    "density_on_grid",
]

_ABS_FLOOR = 1e-18


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, estimate: float = float("nan")):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class KernelQuery:
    """Arguments of one kernel evaluation plus quadrature controls."""

    s: float
    t: float
    x: float
    y: float
    quad_tol: float = 1e-8
    max_subdiv: int = 64

    def __post_init__(self):
        if not self.t > self.s:
            raise ValueError(f"need t > s, got s={self.s}, t={self.t}")
        if not self.quad_tol > 0:
            raise ValueError(f"quad_tol must be positive, got {self.quad_tol}")
        if self.max_subdiv < 1:
            raise ValueError(f"max_subdiv must be >= 1, got {self.max_subdiv}")


def _phi(tau: float, z: float) -> float:
    return exp(-z * z / (2.0 * tau)) / sqrt(2.0 * pi * tau)


def _sgn(z: float) -> float:
    if z > 0:
        return 1.0
    if z < 0:
        return -1.0
    return 0.0


def constant_alpha_density(tau: float, x: float, y: float, a: float) -> float:
    """Closed-form kernel for a constant skewness parameter.

    For a = 1/2 this reduces exactly to the Gaussian kernel of variance tau.
    """
    if not tau > 0:
        raise ValueError(f"need tau > 0, got {tau}")
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"skewness parameter must lie in [0, 1], got {a}")
    crossing = (1.0 + _sgn(y) * (2.0 * a - 1.0)) * _phi(tau, abs(x) + abs(y))
    if x * y > 0:
        return _phi(tau, y - x) - _phi(tau, y + x) + crossing
    return crossing


def _quad(f, a, b, quad_tol, max_subdiv, what, err_acc=None):
    out = quad(f, a, b, epsabs=_ABS_FLOOR, epsrel=quad_tol, limit=max_subdiv, full_output=1)
    if len(out) > 3:
        raise QuadratureError(f"{what}: {out[3]}", estimate=float(out[1]))
    if err_acc is not None:
        err_acc.append(float(out[1]))
    return out[0]


def _shifted_pieces(alpha: AlphaStep, s: float, tau: float):
    """Edges and per-piece alpha values of u -> alpha(s + u) on [0, tau]."""
    breaks = [float(u) for u in alpha.breakpoints_within(s, s + tau) - s]
    edges = [0.0] + breaks + [tau]
    values = [float(alpha(s + e)) for e in edges[:-1]]
    return edges, values


def _crossing_integral(tau, x, y, edges, coeffs, quad_tol, max_subdiv, err_acc=None):
    ay = abs(y)
    x2 = x * x
    y2 = y * y

    def g(u):
        w = tau - u
        return (ay / pi) * exp(-y2 / (2.0 * w) - x2 / (2.0 * u)) / (sqrt(u) * w * sqrt(w))

    def g_left(v):  # u = v^2 kills the 1/sqrt(u) factor
        u = v * v
        if u == 0.0:
            if x != 0.0:
                return 0.0
            return 2.0 * (ay / pi) * exp(-y2 / (2.0 * tau)) / (tau * sqrt(tau))
        w = tau - u
        return 2.0 * (ay / pi) * exp(-y2 / (2.0 * w) - x2 / (2.0 * u)) / (w * sqrt(w))

    def g_right(q):  # q = |y|/sqrt(tau-u) turns the endpoint layer into a Gaussian tail
        u = tau - y2 / (q * q)
        if u <= 0.0:
            return 0.0
        return (2.0 / pi) * exp(-q * q / 2.0 - x2 / (2.0 * u)) / sqrt(u)

    total = 0.0
    for (a, b), c in zip(zip(edges[:-1], edges[1:]), coeffs):
        if c == 0.0 or b <= a:
            continue
        if a == 0.0 and b == tau:
            mid = tau / 2.0
            part = _quad(g_left, 0.0, sqrt(mid), quad_tol, max_subdiv,
                         "crossing integral near u=0", err_acc)
            part += _quad(g_right, ay / sqrt(tau - mid), np.inf, quad_tol, max_subdiv,
                          "crossing integral near u=tau", err_acc)
        elif a == 0.0:
            part = _quad(g_left, 0.0, sqrt(b), quad_tol, max_subdiv,
                         "crossing integral near u=0", err_acc)
        elif b == tau:
            part = _quad(g_right, ay / sqrt(tau - a), np.inf, quad_tol, max_subdiv,
                         "crossing integral near u=tau", err_acc)
        else:
            part = _quad(g, a, b, quad_tol, max_subdiv, "crossing integral interior piece", err_acc)
        total += c * part
    return total


def transition_density_with_error(q: KernelQuery, alpha: AlphaStep):
    """Kernel value p(s, t; x, y) with the summed quadrature error estimate."""
    tau = q.t - q.s
    if q.y == 0.0:
        # the formula is undefined on the axis; average the one-sided limits
        delta = 1e-6 * sqrt(tau)
        plus, e1 = transition_density_with_error(
            KernelQuery(q.s, q.t, q.x, delta, q.quad_tol, q.max_subdiv), alpha)
        minus, e2 = transition_density_with_error(
            KernelQuery(q.s, q.t, q.x, -delta, q.quad_tol, q.max_subdiv), alpha)
        return 0.5 * (plus + minus), 0.5 * (e1 + e2)

    edges, alphas = _shifted_pieces(alpha, q.s, tau)
    sy = _sgn(q.y)
    coeffs = [(1.0 + sy * (2.0 * a - 1.0)) / 2.0 for a in alphas]
    errs: list = []
    crossing = _crossing_integral(tau, q.x, q.y, edges, coeffs, q.quad_tol, q.max_subdiv, errs)
    direct = _phi(tau, q.y - q.x) - _phi(tau, q.y + q.x) if q.x * q.y > 0 else 0.0
    total = crossing + direct
    err = float(sum(errs))
    if total < 0.0:
        scale = max(1.0, abs(direct), abs(crossing))
        if total < -q.quad_tol * scale:
            raise QuadratureError(f"kernel value {total} is negative beyond quadrature noise", estimate=-total)
        return 0.0, err
    return total, err


def transition_density(q: KernelQuery, alpha: AlphaStep) -> float:
    """Kernel value p(s, t; x, y) by adaptive quadrature.

    At y = 0, where the formula is undefined, the symmetric average of the
    two one-sided limits is returned.
    """
    return transition_density_with_error(q, alpha)[0]


def density_normalization(s: float, t: float, x: float, alpha: AlphaStep,
                          quad_tol: float = 1e-8, max_subdiv: int = 64) -> float:
    """Mass of the kernel over [-c, c], c = |x| + 8 sqrt(t-s); should be 1."""
    if not t > s:
        raise ValueError(f"need t > s, got s={s}, t={t}")
    c = abs(x) + 8.0 * sqrt(t - s)
    inner_tol = max(quad_tol * 1e-2, 1e-12)

    def p(y):
        return transition_density(KernelQuery(s, t, x, y, inner_tol, max_subdiv), alpha)

    left = _quad(p, -c, 0.0, quad_tol, 200, "kernel mass, y < 0")
    right = _quad(p, 0.0, c, quad_tol, 200, "kernel mass, y > 0")
    return left + right


def chapman_kolmogorov_residual(s: float, r: float, t: float, x: float, y: float,
                                alpha: AlphaStep, quad_tol: float = 1e-8,
                                max_subdiv: int = 64) -> float:
    """|int p(s,r;x,z) p(r,t;z,y) dz - p(s,t;x,y)| with the z-integral split at 0."""
    if not (s < r < t):
        raise ValueError(f"need s < r < t, got {s}, {r}, {t}")
    c = max(abs(x), abs(y)) + 8.0 * sqrt(t - s)
    inner_tol = max(quad_tol * 1e-2, 1e-12)

    def integrand(z):
        first = transition_density(KernelQuery(s, r, x, z, inner_tol, max_subdiv), alpha)
        if first == 0.0:
            return 0.0
        second = transition_density(KernelQuery(r, t, z, y, inner_tol, max_subdiv), alpha)
        return first * second

    left = _quad(integrand, -c, 0.0, quad_tol, 200, "semigroup composition, z < 0")
    right = _quad(integrand, 0.0, c, quad_tol, 200, "semigroup composition, z > 0")
    direct = transition_density(KernelQuery(s, t, x, y, inner_tol, max_subdiv), alpha)
    return abs(left + right - direct)


def conditional_mean(s: float, t: float, xs: float, alpha: AlphaStep,
                     quad_tol: float = 1e-8, max_subdiv: int = 64) -> float:
    """E[X_t | X_s = xs] = xs + int_0^{t-s} (2 alpha - 1)(s+u) exp(-xs^2/2u)/sqrt(2 pi u) du."""
    if not t > s:
        raise ValueError(f"need t > s, got s={s}, t={t}")
    tau = t - s
    edges, alphas = _shifted_pieces(alpha, s, tau)
    xs2 = xs * xs

    def h(u):
        return exp(-xs2 / (2.0 * u)) / sqrt(2.0 * pi * u)

    def h_left(v):  # u = v^2
        if v == 0.0:
            return 0.0 if xs != 0.0 else 2.0 / sqrt(2.0 * pi)
        return 2.0 * exp(-xs2 / (2.0 * v * v)) / sqrt(2.0 * pi)

    total = 0.0
    for (a, b), av in zip(zip(edges[:-1], edges[1:]), alphas):
        w = 2.0 * av - 1.0
        if w == 0.0 or b <= a:
            continue
        if a == 0.0:
            part = _quad(h_left, 0.0, sqrt(b), quad_tol, max_subdiv, "conditional mean near u=0")
        else:
            part = _quad(h, a, b, quad_tol, max_subdiv, "conditional mean interior piece")
        total += w * part
    return xs + total


def density_on_grid(s: float, t: float, x: float, alpha: AlphaStep, ys: np.ndarray,
                    quad_tol: float = 1e-8, max_subdiv: int = 64,
                    with_errors: bool = False):
    """Kernel values over a grid of y points, optionally with error estimates."""
    pairs = [
        transition_density_with_error(KernelQuery(s, t, x, float(y), quad_tol, max_subdiv), alpha)
        for y in ys
    ]
    values = np.array([p for p, _ in pairs])
    if with_errors:
        return values, np.array([e for _, e in pairs])
    return values
