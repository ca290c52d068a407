"""Weighted measures on corner domains R_+^n x R^m.

The model chart carries the measure with density ``prod_i w_i^(2 b_i(w;y) - 1)``
in square-root coordinates ``w_i = sqrt(x_i)``, optionally multiplied by a
bounded factor ``exp(U)``.  This module evaluates masses of sup-norm balls,
doubling ratios, and the sampled doubling dimension, and provides the
surrogate intrinsic distances used everywhere else in the toolkit.

Masses are reported in w-coordinates, i.e. against ``prod w_i^(2b_i-1) dw dy``;
the x-coordinate mass of the same set is ``2^n`` times larger (the Jacobian of
``x = w^2`` per degenerate axis).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, QuadratureConvergenceError
from .quadrature import interval_rule

WeightFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class WeightSpec:
    """Transverse weight functions b_i with their uniformity constants.

    Each entry of ``weight_fns`` is either a positive constant (fast path)
    or a callable ``b(w, y)`` taking arrays of shape (..., n) and (..., m)
    and returning shape (...).  ``beta0 <= b_i <= upper`` must hold
    everywhere, the weights must be constant outside the sup-norm ball of
    radius ``constancy_radius``, and they must obey the log-modulus bound
    |b(p) - b(q)| <= log_modulus / |log rho_inf(p, q)| at close range.
    """

    weight_fns: tuple
    beta0: float
    upper: float
    constancy_radius: float = 0.0
    log_modulus: float = 0.0

    def __post_init__(self):
        if self.beta0 <= 0:
            raise DomainError("beta0 must be positive")
        if self.upper < self.beta0:
            raise DomainError("upper weight bound below beta0")

    @property
    def n(self) -> int:
        return len(self.weight_fns)

    @property
    def is_constant(self) -> bool:
        return all(not callable(b) for b in self.weight_fns)

    @classmethod
    def constant(cls, values: Sequence[float]) -> "WeightSpec":
        vals = tuple(float(v) for v in values)
        if any(v <= 0 for v in vals):
            raise DomainError("constant weights must be positive")
        lo = min(vals) if vals else 1.0
        hi = max(vals) if vals else 1.0
        return cls(weight_fns=vals, beta0=lo, upper=hi)

    def evaluate(self, i: int, w: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Value of b_i at points given by w (..., n) and y (..., m)."""
        b = self.weight_fns[i]
        if callable(b):
            return np.asarray(b(w, y), dtype=float)
        shape = w.shape[:-1] if self.n else y.shape[:-1]
        return np.full(shape, float(b))

    def check_samples(self, w: np.ndarray, y: np.ndarray) -> None:
        """Raise if the bound/constancy/log-modulus invariants fail on a sample."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        vals = np.stack([self.evaluate(i, w, y) for i in range(self.n)], axis=-1)
        if vals.size and (vals.min() < self.beta0 - 1e-12 or vals.max() > self.upper + 1e-12):
            raise DomainError(
                f"weight values escape [{self.beta0}, {self.upper}]: "
                f"range [{vals.min()}, {vals.max()}]"
            )
        pts = np.concatenate([w, y], axis=-1)
        sup = np.max(np.abs(pts), axis=-1)
        if self.constancy_radius > 0:
            far = sup > self.constancy_radius
            if far.any():
                ref = vals[far][0]
                if not np.allclose(vals[far], ref, atol=1e-10):
                    raise DomainError("weights vary beyond the declared constancy radius")
        if self.log_modulus > 0 and len(pts) > 1:
            d = np.max(np.abs(pts[:, None, :] - pts[None, :, :]), axis=-1)
            close = (d > 0) & (d < 0.5)
            if close.any():
                bound = self.log_modulus / np.abs(np.log(d[close]))
                gap = np.max(np.abs(vals[:, None, :] - vals[None, :, :]), axis=-1)[close]
                if (gap > bound + 1e-12).any():
                    raise DomainError("log-modulus continuity bound violated on sample pair")


@dataclass(frozen=True)
class WeightedMeasure:
    """The corner measure prod_i w_i^(2 b_i(w;y)-1) e^U dw dy on R_+^n x R^m."""

    weights: WeightSpec
    m: int = 0
    u_factor: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    @property
    def n(self) -> int:
        return self.weights.n

    def log_density_w(self, w: np.ndarray, y: np.ndarray) -> np.ndarray:
        """log of the density at strictly interior points (w > 0 per axis)."""
        w = np.asarray(w, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(w.shape[:-1] if self.n else y.shape[:-1])
        for i in range(self.n):
            b = self.weights.evaluate(i, w, y)
            out = out + (2.0 * b - 1.0) * np.log(w[..., i])
        if self.u_factor is not None:
            out = out + np.asarray(self.u_factor(w, y), dtype=float)
        return out


_METRIC_KINDS = ("sup_w", "euclid_w", "intrinsic_surrogate_x")


@dataclass(frozen=True)
class Ball:
    """A metric ball; sup_w balls are coordinate boxes and support mass evaluation."""

    center_w: tuple[float, ...]
    center_y: tuple[float, ...]
    radius: float
    metric_kind: str = "sup_w"

    def __post_init__(self):
        if self.metric_kind not in _METRIC_KINDS:
            raise DomainError(f"unknown metric kind {self.metric_kind!r}")
        if self.radius < 0:
            raise DomainError("ball radius must be nonnegative")
        if any(w < 0 for w in self.center_w):
            raise DomainError("w-coordinates of a ball center must be nonnegative")

    def w_intervals(self) -> list[tuple[float, float]]:
        r = self.radius
        return [(max(w - r, 0.0), w + r) for w in self.center_w]

    def y_intervals(self) -> list[tuple[float, float]]:
        r = self.radius
        return [(y - r, y + r) for y in self.center_y]


def ball_mass_1d_const(b: float, w: float, r: float) -> float:
    """Mass of [max(w-r,0), w+r] under v^(2b-1) dv, in closed form."""
    if b <= 0 or r <= 0:
        raise DomainError("ball_mass_1d_const needs b > 0 and r > 0")
    if w < 0:
        raise DomainError("center must be nonnegative")
    hi = (w + r) ** (2.0 * b)
    lo = 0.0 if w <= r else (w - r) ** (2.0 * b)
    return (hi - lo) / (2.0 * b)


def segment_mass_const(b: float, lo: float, hi: float) -> float:
    """Mass of [lo, hi] subset of [0, inf) under v^(2b-1) dv."""
    if b <= 0:
        raise DomainError("weight must be positive")
    if hi <= lo:
        return 0.0
    return (hi ** (2.0 * b) - max(lo, 0.0) ** (2.0 * b)) / (2.0 * b)


def _axis_panels(
    lo: float, hi: float, singular_exponent: float | None, panels: int, npts: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Panelised quadrature on one axis.

    Returns nodes, weights, and the exponent absorbed into the weight at each
    node (zero off the singular panel).  Only a panel whose lower endpoint is
    exactly 0 absorbs the power weight.
    """
    edges = np.linspace(lo, hi, panels + 1)
    xs, ws, absorbed = [], [], []
    for k in range(panels):
        a, c = float(edges[k]), float(edges[k + 1])
        if singular_exponent is not None and a == 0.0:
            x, wgt = interval_rule(a, c, npts, left_exponent=singular_exponent)
            e = np.full_like(x, singular_exponent)
        else:
            x, wgt = interval_rule(a, c, npts)
            e = np.zeros_like(x)
        xs.append(x)
        ws.append(wgt)
        absorbed.append(e)
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(absorbed)


def _tensor_mass(measure: WeightedMeasure, ball: Ball, panels: int, npts: int) -> float:
    n, m = measure.n, measure.m
    axes_nodes, axes_weights, axes_absorbed = [], [], []
    for i, (lo, hi) in enumerate(ball.w_intervals()):
        anchor_w = np.array(ball.center_w, dtype=float)
        anchor_w[i] = 0.0
        anchor_y = np.array(ball.center_y, dtype=float)
        b_anchor = float(measure.weights.evaluate(i, anchor_w[None, :], anchor_y[None, :])[0])
        exponent = 2.0 * b_anchor - 1.0 if lo == 0.0 else None
        x, wgt, absorbed = _axis_panels(lo, hi, exponent, panels, npts)
        axes_nodes.append(x)
        axes_weights.append(wgt)
        axes_absorbed.append(absorbed)
    for lo, hi in ball.y_intervals():
        x, wgt, absorbed = _axis_panels(lo, hi, None, panels, npts)
        axes_nodes.append(x)
        axes_weights.append(wgt)
        axes_absorbed.append(absorbed)

    total_pts = math.prod(len(x) for x in axes_nodes) if axes_nodes else 1
    if total_pts > 2e7:
        raise QuadratureConvergenceError(
            "tensor quadrature grid exceeds the point budget", (float("nan"), float("nan"))
        )
    if not axes_nodes:
        return 1.0

    grids = np.meshgrid(*axes_nodes, indexing="ij")
    w_pts = (
        np.stack([g.ravel() for g in grids[:n]], axis=-1) if n else np.zeros((total_pts, 0))
    )
    y_pts = (
        np.stack([g.ravel() for g in grids[n:]], axis=-1) if m else np.zeros((total_pts, 0))
    )

    log_residual = np.zeros(total_pts)
    for i in range(n):
        b = measure.weights.evaluate(i, w_pts, y_pts)
        absorbed = np.meshgrid(*axes_absorbed, indexing="ij")[i].ravel()
        log_residual += (2.0 * b - 1.0 - absorbed) * np.log(w_pts[:, i])
    if measure.u_factor is not None:
        log_residual += np.asarray(measure.u_factor(w_pts, y_pts), dtype=float)

    weight_prod = np.ones(total_pts)
    wgrids = np.meshgrid(*axes_weights, indexing="ij")
    for g in wgrids:
        weight_prod *= g.ravel()
    return float(np.dot(weight_prod, np.exp(log_residual)))


def ball_mass(
    measure: WeightedMeasure,
    ball: Ball,
    rtol: float = 1e-9,
    max_level: int = 8,
    npts: int = 8,
) -> float:
    """Mass of a sup-norm ball by tensorized adaptive quadrature.

    Corner-touching axes use Gauss-Jacobi with the exponent of the weight at
    the corner anchor; panel counts double per axis until two successive
    estimates agree to ``rtol``.
    """
    if ball.metric_kind != "sup_w":
        raise DomainError("mass evaluation is defined for sup_w (product) balls")
    if len(ball.center_w) != measure.n or len(ball.center_y) != measure.m:
        raise DomainError("ball center dimension does not match the measure")
    if ball.radius == 0.0:
        return 0.0

    estimates = [_tensor_mass(measure, ball, panels=1, npts=npts)]
    for level in range(1, max_level + 1):
        estimates.append(_tensor_mass(measure, ball, panels=2**level, npts=npts))
        if abs(estimates[-1] - estimates[-2]) <= rtol * max(abs(estimates[-1]), 1e-300):
            return estimates[-1]
    raise QuadratureConvergenceError(
        f"ball mass did not converge to rtol={rtol} within {max_level} refinement levels",
        (estimates[-2], estimates[-1]),
    )


def doubling_ratio(
    measure: WeightedMeasure,
    center_w: Sequence[float],
    center_y: Sequence[float],
    r: float,
    rtol: float = 1e-9,
) -> float:
    """mu(B_2r) / mu(B_r) for the sup-norm ball at the given center."""
    if r <= 0:
        raise DomainError("doubling ratio is undefined for radius 0")
    small = ball_mass(measure, Ball(tuple(center_w), tuple(center_y), r), rtol=rtol)
    big = ball_mass(measure, Ball(tuple(center_w), tuple(center_y), 2.0 * r), rtol=rtol)
    if small <= 0.0:
        raise DomainError("ball of positive radius has nonpositive mass")
    return big / small


@dataclass(frozen=True)
class DoublingSweep:
    """Deterministic center/radius grid over which doubling ratios are sampled."""

    centers: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    radii: tuple[float, ...]

    @classmethod
    def default(
        cls,
        measure: WeightedMeasure,
        radius_base: float = 1.0,
        radius_octaves: int = 6,
        axis_values: Sequence[float] | None = None,
    ) -> "DoublingSweep":
        scale = max(measure.weights.constancy_radius, 1.0)
        if axis_values is None:
            axis_values = (0.0, scale / 4.0, scale, 3.0 * scale)
        w_axes = [tuple(axis_values)] * measure.n
        y_axes = [tuple(axis_values)] * measure.m
        centers = tuple(
            (tuple(c[: measure.n]), tuple(c[measure.n :]))
            for c in itertools.product(*w_axes, *y_axes)
        ) or ((tuple(), tuple()),)
        radii = tuple(radius_base * 2.0 ** (-j) for j in range(radius_octaves + 1))
        return cls(centers=centers, radii=radii)


def estimate_doubling_dimension(
    measure: WeightedMeasure,
    sweep: DoublingSweep,
    rtol: float = 1e-9,
    jobs: int = 1,
) -> tuple[float, tuple[tuple[tuple[float, ...], tuple[float, ...]], float]]:
    """log2 of the largest sampled doubling ratio, plus the attaining (center, radius).

    Deterministic for a fixed sweep.  The result is a sampled lower estimate of
    the doubling exponent, not a proven supremum.
    """
    if not sweep.centers or not sweep.radii:
        raise DomainError("doubling sweep must contain centers and radii")

    cases = [(c, r) for c in sweep.centers for r in sweep.radii]

    def one(case):
        (cw, cy), r = case
        return doubling_ratio(measure, cw, cy, r, rtol=rtol)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            ratios = list(pool.map(one, cases))
    else:
        ratios = [one(case) for case in cases]

    idx = int(np.argmax(ratios))
    return math.log2(ratios[idx]), cases[idx]


def sup_distance_w(p: Sequence[float], q: Sequence[float]) -> float:
    """sup-norm distance between points given in (w; y) coordinates."""
    return float(np.max(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))))


def euclid_distance_w(p: Sequence[float], q: Sequence[float]) -> float:
    """Euclidean distance between points given in (w; y) coordinates."""
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


def intrinsic_distance(
    x1: Sequence[float] | float,
    x2: Sequence[float] | float,
    y1: Sequence[float] | float | None = None,
    y2: Sequence[float] | float | None = None,
) -> float:
    """Surrogate intrinsic distance in x-coordinates on the corner chart.

    sqrt( sum_i |sqrt(x1_i) - sqrt(x2_i)|^2 + |y1 - y2|^2 ): the Euclidean
    distance in square-root coordinates, uniformly equivalent to the metric
    dual to the principal symbol.
    """
    a = np.atleast_1d(np.asarray(x1, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    if (a < 0).any() or (b < 0).any():
        raise DomainError("x-coordinates must be nonnegative")
    d2 = float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))
    if y1 is not None or y2 is not None:
        ya = np.atleast_1d(np.asarray(0.0 if y1 is None else y1, dtype=float))
        yb = np.atleast_1d(np.asarray(0.0 if y2 is None else y2, dtype=float))
        d2 += float(np.sum((ya - yb) ** 2))
    return math.sqrt(d2)


def unit_interval_distance(x1, x2):
    """Intrinsic distance on [0,1] for the symbol x(1-x): 2|asin(sqrt(x1)) - asin(sqrt(x2))|.

    Closed form of the Riemannian distance ``integral dx / sqrt(x(1-x))``; it
    degenerates like |sqrt(x1)-sqrt(x2)| at 0 and symmetrically at 1, which the
    one-corner surrogate does not capture near x = 1.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if (x1 < 0).any() or (x1 > 1).any() or (x2 < 0).any() or (x2 > 1).any():
        raise DomainError("unit-interval points must lie in [0, 1]")
    return np.abs(2.0 * (np.arcsin(np.sqrt(x1)) - np.arcsin(np.sqrt(x2))))
