"""Empirical parabolic Harnack ratios, Hoelder fits, and singular-potential bounds.

A "weak solution" here is the Crank-Nicolson evolution of the conforming FEM
problem.  Probes sample space-time windows

    W+ = (s - r^2, s) x B_r,   W- = (s - 3r^2, s - 2r^2) x B_r,
    W  = (s - 4r^2, s) x B_2r,

in the intrinsic metric of the 1D domain and report sup(W-)/inf(W+) for
nonnegative data, the Hoelder exponent of the interior modulus of continuity,
the blow-up rate of the Hoelder seminorm for rough data, and the constant
C_eta of the log-singular potential inequality

    integral |q| u^2 dmu <= eta Q(u, u) + C_eta integral u^2 dmu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .discretization import DiscreteOperator
from .errors import DegenerateWindowError, DomainError, NumericalError
from .heat_semigroup import Domain1D, ParabolicTrajectory, solve_parabolic


@dataclass(frozen=True)
class HarnackWindow:
    """Space-time probe window; times are relative to the data at t = 0."""

    s: float
    r: float
    center: float

    def __post_init__(self):
        if self.r <= 0:
            raise DomainError("window radius must be positive")
        if self.s < 4.0 * self.r**2 * (1.0 - 1e-12):
            raise DomainError("window needs s >= 4 r^2 so W sits after the data time")

    @property
    def w_plus_t(self) -> tuple[float, float]:
        return (self.s - self.r**2, self.s)

    @property
    def w_minus_t(self) -> tuple[float, float]:
        return (self.s - 3.0 * self.r**2, self.s - 2.0 * self.r**2)

    @property
    def w_full_t(self) -> tuple[float, float]:
        return (self.s - 4.0 * self.r**2, self.s)


def _ball_nodes(disc: DiscreteOperator, domain: Domain1D, center: float, radius: float) -> np.ndarray:
    nodes = disc.nodes
    dist = np.asarray(domain.distance(center, nodes), dtype=float)
    idx = np.flatnonzero(dist <= radius)
    if idx.size == 0:
        raise DomainError(f"no grid nodes inside the ball of radius {radius} at {center}")
    return idx


def _slice_indices(times: np.ndarray, lo: float, hi: float) -> np.ndarray:
    idx = np.flatnonzero((times >= lo - 1e-12) & (times <= hi + 1e-12))
    if idx.size == 0:
        raise DomainError(f"no stored time slices inside ({lo}, {hi})")
    return idx


def harnack_ratio(
    disc: DiscreteOperator,
    domain: Domain1D,
    window: HarnackWindow,
    initial: np.ndarray,
    steps_per_r2: int = 40,
    trajectory: ParabolicTrajectory | None = None,
) -> float:
    """sup over W- divided by inf over W+ for the evolution of nonnegative data."""
    initial = np.asarray(initial, dtype=float)
    if initial.min() < 0:
        raise DomainError("Harnack probes require nonnegative initial data")
    if not initial.any():
        raise DomainError("initial data must not be identically zero")
    if trajectory is None:
        steps = max(int(math.ceil(window.s / window.r**2 * steps_per_r2)), 8)
        trajectory = solve_parabolic(disc, initial, window.s, steps)
    ball = _ball_nodes(disc, domain, window.center, window.r)
    t_minus = _slice_indices(trajectory.times, *window.w_minus_t)
    t_plus = _slice_indices(trajectory.times, *window.w_plus_t)
    sup_minus = float(trajectory.states[np.ix_(t_minus, ball)].max())
    inf_plus = float(trajectory.states[np.ix_(t_plus, ball)].min())
    if inf_plus <= 0.0:
        k = trajectory.states[np.ix_(t_plus, ball)].argmin()
        ti, xi = np.unravel_index(k, (t_plus.size, ball.size))
        raise DegenerateWindowError(
            "solution vanishes inside W+ at sampled resolution",
            (float(trajectory.times[t_plus[ti]]), float(disc.nodes[ball[xi]])),
        )
    return sup_minus / inf_plus


def random_field_family(
    disc: DiscreteOperator,
    count: int,
    seed: int,
    smoothing_steps: int = 1,
    clip: float = 3.0,
) -> np.ndarray:
    """Nonnegative probe data: clipped nodal Gaussians, one diffusion step, shifted.

    Counter-based streams keyed by (seed, sample index) keep the family stable
    under reordering or parallel evaluation.
    """
    n = disc.n_dofs
    fields = np.empty((count, n))
    length = float(disc.nodes[-1] - disc.nodes[0])
    dt = (0.02 * length) ** 2
    for i in range(count):
        gen = np.random.Generator(np.random.Philox(key=seed).jumped(i))
        raw = np.clip(gen.standard_normal(n), -clip, clip)
        # all-implicit startup so the smoothing step actually damps the noise
        smooth = solve_parabolic(
            disc, raw, smoothing_steps * dt, smoothing_steps, rannacher_startup=smoothing_steps
        ).states[-1]
        fields[i] = smooth - smooth.min()
    return fields


@dataclass(frozen=True)
class ScaleStabilityReport:
    max_ratio_per_radius: dict[float, float]
    spread: float
    passed: bool


def harnack_scale_stability(
    disc: DiscreteOperator,
    domain: Domain1D,
    center: float,
    radii: Sequence[float],
    n_data: int = 20,
    seed: int = 2024,
    spread_factor: float = 3.0,
) -> ScaleStabilityReport:
    """Max Harnack ratio per radius over a seeded data family; spread = max/min."""
    fields = random_field_family(disc, n_data, seed)
    per_radius: dict[float, float] = {}
    for r in radii:
        window = HarnackWindow(s=4.0 * r**2, r=r, center=center)
        worst = 1.0
        steps = max(int(math.ceil(window.s / r**2 * 40)), 8)
        for u0 in fields:
            traj = solve_parabolic(disc, u0, window.s, steps)
            worst = max(worst, harnack_ratio(disc, domain, window, u0, trajectory=traj))
        per_radius[float(r)] = worst
    vals = list(per_radius.values())
    spread = max(vals) / min(vals)
    return ScaleStabilityReport(per_radius, spread, spread < spread_factor)


# ---------------------------------------------------------------------------
# Hoelder continuity


@dataclass(frozen=True)
class HoelderFit:
    gamma: float
    C: float
    residual: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise DomainError("Hoelder exponent must lie in (0, 1]")


def holder_exponent(
    trajectories: Sequence[ParabolicTrajectory],
    disc: DiscreteOperator,
    domain: Domain1D,
    window: HarnackWindow,
    n_base: int = 9,
    n_times: int = 5,
    deltas: np.ndarray | None = None,
) -> HoelderFit:
    """Interior Hoelder exponent of the worst modulus of continuity in W+.

    For each relative separation ``delta`` the modulus is probed at a fixed,
    grid-independent set of space-time pairs: base points in the inner fifth
    of the window ball, displaced by the metric offset ``delta * r`` (pure
    space) or by ``(delta * r)^2`` (pure time); the two displacements carry
    equal parabolic separation.  The worst modulus over pairs and solutions,
    normalised by sup |u| over the full window, is regressed against delta in
    log-log; the exponent is capped at 1 (smooth data otherwise overshoots).
    """
    if len(trajectories) < 5:
        raise DomainError("need at least 5 solutions for a stable exponent fit")
    if deltas is None:
        deltas = np.geomspace(0.08, 0.8, 10)
    r = window.r
    nodes = disc.nodes
    arc_center = float(domain.arc(window.center))
    base_arcs = arc_center + np.linspace(-0.2 * r, 0.2 * r, n_base)
    base_idx = np.unique(
        [int(np.argmin(np.abs(nodes - domain.from_arc(s)))) for s in base_arcs]
    )
    t_lo, t_hi = window.w_plus_t
    base_times = np.linspace(t_lo, t_lo + 0.3 * (t_hi - t_lo), n_times)

    ball = _ball_nodes(disc, domain, window.center, window.r)
    mods = np.zeros(len(deltas))
    any_signal = False
    for traj in trajectories:
        t_full = _slice_indices(traj.times, *window.w_full_t)
        sup_w = float(np.abs(traj.states[np.ix_(t_full, ball)]).max())
        if sup_w == 0.0:
            continue
        any_signal = True
        t_idx = [int(np.argmin(np.abs(traj.times - t))) for t in base_times]
        for k, d in enumerate(deltas):
            off = d * r
            shifted_idx = [
                int(np.argmin(np.abs(nodes - domain.from_arc(float(domain.arc(nodes[i])) + off))))
                for i in base_idx
            ]
            for a, ti in enumerate(t_idx):
                u_t = traj.states[ti]
                # pure-space displacement at parabolic separation delta
                space_mod = np.abs(u_t[base_idx] - u_t[shifted_idx]).max()
                # pure-time displacement at the same separation
                tj = int(np.argmin(np.abs(traj.times - (base_times[a] + off * off))))
                time_mod = np.abs(traj.states[tj][base_idx] - u_t[base_idx]).max()
                mods[k] = max(mods[k], max(space_mod, time_mod) / sup_w)
    # normalized moduli at solver-roundoff scale mean the data was constant
    if not any_signal or mods.max() <= 1e-12:
        raise DomainError("all probe solutions are constant; exponent undefined")

    keep = mods > 1e-12
    if keep.sum() < 4:
        raise DomainError("not enough separation samples for a fit")
    lx, ly = np.log(deltas[keep]), np.log(mods[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    gamma = float(min(max(slope, 1e-6), 1.0))
    return HoelderFit(gamma=gamma, C=float(np.exp(intercept)), residual=residual)


@dataclass(frozen=True)
class BlowupFit:
    rate: float
    amplitude: float
    gamma: float
    passed: bool
    seminorms: tuple[tuple[float, float], ...]


def holder_seminorm(
    disc: DiscreteOperator,
    domain: Domain1D,
    state: np.ndarray,
    gamma: float,
    max_nodes: int = 150,
) -> float:
    """Discrete anisotropic seminorm sup |u(x) - u(y)| / rho(x, y)^gamma."""
    idx = np.linspace(0, disc.n_dofs - 1, min(max_nodes, disc.n_dofs)).astype(int)
    xs = disc.nodes[idx]
    u = state[idx]
    rho = np.abs(np.asarray([[domain.distance(a, b) for b in xs] for a in xs]))
    du = np.abs(u[:, None] - u[None, :])
    mask = rho > 0
    return float((du[mask] / rho[mask] ** gamma).max())


def holder_blowup(
    disc: DiscreteOperator,
    domain: Domain1D,
    initial: np.ndarray,
    times: Sequence[float],
    gamma: float = 0.5,
    steps: int = 600,
) -> BlowupFit:
    """Fit ||u(t)||_(0,gamma) ~ A t^(-p) on a log time grid in (0, 1/2).

    Passing means the blow-up rate does not exceed max(gamma/2, 1/2) + 0.1,
    the continuous-data rate.
    """
    times = np.asarray(sorted(float(t) for t in times))
    if times[0] <= 0 or times[-1] >= 0.5:
        raise DomainError("blow-up time grid must lie inside (0, 1/2)")
    traj = solve_parabolic(disc, np.asarray(initial, dtype=float), float(times[-1]), steps)
    pairs = []
    for t in times:
        semi = holder_seminorm(disc, domain, traj.at_time(t), gamma)
        pairs.append((float(t), semi))
    ts = np.array([p[0] for p in pairs])
    ss = np.array([max(p[1], 1e-300) for p in pairs])
    slope, intercept = np.polyfit(np.log(ts), np.log(ss), 1)
    rate = float(-slope)
    cap = max(gamma / 2.0, 0.5) + 0.1
    return BlowupFit(
        rate=rate,
        amplitude=float(np.exp(intercept)),
        gamma=gamma,
        passed=rate <= cap,
        seminorms=tuple(pairs),
    )


# ---------------------------------------------------------------------------
# log-singular potential inequality


def singular_inequality_constant(
    disc: DiscreteOperator,
    q_fn: Callable[[np.ndarray], np.ndarray],
    eta: float,
) -> float:
    """Minimal C with integral |q| u^2 dmu <= eta Q(u,u) + C integral u^2 dmu.

    Computed as the largest eigenvalue of (Q_|q| - eta S) against M, clamped
    below at zero.  |q| is applied by nodal (lumped) quadrature with endpoint
    nodes pulled half an element off the boundary, where log-type potentials
    stay finite.
    """
    if eta < 0:
        raise DomainError("eta must be nonnegative")
    nodes = disc.nodes.copy()
    nodes[0] += 0.5 * (disc.nodes[1] - disc.nodes[0])
    nodes[-1] -= 0.5 * (disc.nodes[-1] - disc.nodes[-2])
    qvals = np.abs(np.asarray(q_fn(nodes), dtype=float))
    if not np.all(np.isfinite(qvals)):
        raise DomainError("potential must be finite at the pulled-off quadrature nodes")
    lumped = disc.lumped_masses()
    A = np.diag(qvals * lumped) - eta * disc.stiffness.toarray()
    try:
        w = scipy.linalg.eigh(A, disc.mass.toarray(), eigvals_only=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalError(f"singular-inequality eigensolve failed: {exc}") from exc
    return float(max(w[-1], 0.0))
