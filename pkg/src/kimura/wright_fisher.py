"""Euler-Maruyama simulation of Wright-Fisher diffusions on [0,1] and the simplex.

The generator is taken literally as ``sum (x_i d_ij - x_i x_j) d_i d_j +
sum b_i d_i`` (no probabilist's 1/2), so the noise matrix solves
``sigma sigma^T = 2 a(x)``; the 1D Beta-oracle tests pin this convention.
States are projected back onto the closed simplex after every step; for
weights bounded below the drift points inward and projections are rare, and
their rate is reported as a diagnostic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalError


def wright_fisher_drift(weights: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """Mutation drift b_i(x) = w_i - (sum w) x_i from n+1 boundary weights.

    In one dimension with weights (b0, b1) this is b0 (1-x) - b1 x, whose
    stationary law is Beta(b0, b1); on the simplex it is Dirichlet(weights).
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) < 2:
        raise DomainError("need one weight per simplex face (n+1 entries)")
    if (w <= 0).any():
        raise DomainError("weights must be positive")
    total = float(w.sum())
    head = w[:-1]

    def drift(x: np.ndarray) -> np.ndarray:
        return head - total * x

    return drift


def simplex_inradius(n: int) -> float:
    """Inradius of {x >= 0, sum x <= 1} in R^n."""
    return 1.0 / (n + math.sqrt(n))


def project_to_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto {x >= 0, sum x <= 1}."""
    x = np.maximum(y, 0.0)
    over = x.sum(axis=1) > 1.0
    if over.any():
        z = y[over]
        u = np.sort(z, axis=1)[:, ::-1]
        css = np.cumsum(u, axis=1) - 1.0
        ks = np.arange(1, z.shape[1] + 1)
        cond = u - css / ks > 0
        rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
        tau = css[np.arange(len(z)), rho] / (rho + 1.0)
        x[over] = np.maximum(z - tau[:, None], 0.0)
    return x


@dataclass(frozen=True)
class SimplexSDE:
    """Euler-Maruyama run description for the simplex diffusion."""

    n: int
    drift: Callable[[np.ndarray], np.ndarray]
    dt: float
    steps: int
    paths: int
    seed: int
    initial: np.ndarray
    record_every: int = 0  # 0: keep terminal states only

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("need at least one coordinate")
        if self.dt <= 0 or self.steps < 1 or self.paths < 1:
            raise DomainError("dt, steps, and paths must be positive")
        x0 = np.atleast_2d(np.asarray(self.initial, dtype=float))
        if x0.shape[1] != self.n:
            raise DomainError(f"initial state must have {self.n} coordinates")

    def manifest(self) -> dict:
        return {
            "n": self.n,
            "dt": self.dt,
            "steps": self.steps,
            "paths": self.paths,
            "seed": self.seed,
            "record_every": self.record_every,
            "noise_convention": "sigma sigma^T = 2 a(x); generator carries no 1/2",
            "rng": "Philox keyed by seed, jumped per step",
        }


@dataclass(frozen=True)
class SimulationResult:
    terminal: np.ndarray  # (paths, n)
    trajectory_times: np.ndarray | None
    trajectories: np.ndarray | None  # (k, paths, n) thinned snapshots
    projection_rate: float
    manifest: dict

    def manifest_json(self) -> str:
        return json.dumps(self.manifest, indent=2, sort_keys=True)


def _noise_matrix_root(x: np.ndarray) -> np.ndarray:
    """Batched PSD square root of 2 a(x) = 2(diag(x) - x x^T), clamped at 0."""
    p, n = x.shape
    a = 2.0 * (np.einsum("pi,ij->pij", x, np.eye(n)) - np.einsum("pi,pj->pij", x, x))
    vals, vecs = np.linalg.eigh(a)
    vals = np.clip(vals, 0.0, None)
    return np.einsum("pij,pj,pkj->pik", vecs, np.sqrt(vals), vecs)


def _step_normals(seed: int, step: int, shape: tuple[int, int]) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed).jumped(step + 1))
    return gen.standard_normal(shape)


def simulate(sde: SimplexSDE) -> SimulationResult:
    """Run the Euler-Maruyama scheme with per-step counter-based noise streams."""
    x0 = np.atleast_2d(np.asarray(sde.initial, dtype=float))
    x = np.broadcast_to(x0, (sde.paths, sde.n)).copy()
    # vertices and centroid bound the drift for the step-size check
    probes = np.vstack([np.eye(sde.n), np.zeros((1, sde.n)), np.full((1, sde.n), 1.0 / (sde.n + 1))])
    sup_drift = float(np.abs(np.asarray(sde.drift(probes))).max())
    if sde.dt * sup_drift >= simplex_inradius(sde.n) / 4.0:
        raise DomainError(
            f"dt too large: dt*sup|b| = {sde.dt * sup_drift:.3g} exceeds a quarter inradius "
            f"{simplex_inradius(sde.n) / 4.0:.3g}"
        )
    one_d = sde.n == 1
    sqdt = math.sqrt(sde.dt)
    snapshots: list[np.ndarray] = []
    times: list[float] = []
    projected = 0
    for k in range(sde.steps):
        z = _step_normals(sde.seed, k, (sde.paths, sde.n))
        if one_d:
            xi = x[:, 0]
            sigma = np.sqrt(np.clip(2.0 * xi * (1.0 - xi), 0.0, None))
            y = x + (np.asarray(sde.drift(x)) * sde.dt) + (sigma * z[:, 0] * sqdt)[:, None]
        else:
            sigma = _noise_matrix_root(x)
            y = x + np.asarray(sde.drift(x)) * sde.dt + sqdt * np.einsum("pij,pj->pi", sigma, z)
        if not np.all(np.isfinite(y)):
            raise NumericalError(
                f"non-finite state at step {k}; reduce dt (current dt={sde.dt})"
            )
        x_new = project_to_simplex(y)
        projected += int(np.count_nonzero(np.abs(x_new - y).max(axis=1) > 0.0))
        x = x_new
        if sde.record_every and (k + 1) % sde.record_every == 0:
            snapshots.append(x.copy())
            times.append((k + 1) * sde.dt)
    return SimulationResult(
        terminal=x,
        trajectory_times=np.array(times) if snapshots else None,
        trajectories=np.array(snapshots) if snapshots else None,
        projection_rate=projected / (sde.steps * sde.paths),
        manifest=sde.manifest(),
    )


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class EmpiricalDensity:
    """Normalized histogram of sampled states over explicit bin edges."""

    edges: np.ndarray
    masses: np.ndarray
    path_count: int

    def __post_init__(self):
        if abs(float(self.masses.sum()) - 1.0) > 1e-12:
            raise DomainError("histogram masses must sum to 1")


def stationary_bins(b0: float, b1: float, n_uniform: int = 32) -> np.ndarray:
    """Bin edges on [0,1]; ends with weight < 1 get geometrically widened bins.

    Near a degenerate endpoint the Beta-type mass concentrates, so the two
    outermost uniform bins are merged there to keep edge masses estimable.
    """
    edges = np.linspace(0.0, 1.0, n_uniform + 1)
    keep = np.ones(len(edges), dtype=bool)
    if b0 < 1.0:
        keep[1] = False
    if b1 < 1.0:
        keep[-2] = False
    return edges[keep]


def empirical_stationary(
    states: np.ndarray, edges: np.ndarray, coordinate: int = 0
) -> EmpiricalDensity:
    """Histogram of one coordinate of the sampled states."""
    states = np.asarray(states, dtype=float)
    vals = states if states.ndim == 1 else states[:, coordinate]
    if vals.size == 0:
        raise DomainError("no states to histogram")
    counts, _ = np.histogram(vals, bins=edges)
    total = counts.sum()
    if total == 0:
        raise DomainError("all states fall outside the bin range")
    return EmpiricalDensity(edges=np.asarray(edges), masses=counts / total, path_count=int(vals.size))


def l1_distance(emp: EmpiricalDensity, reference_masses: np.ndarray) -> float:
    """L1 distance between two mass vectors on the same bins."""
    ref = np.asarray(reference_masses, dtype=float)
    if ref.shape != emp.masses.shape:
        raise DomainError("reference masses must live on the same bins")
    return float(np.abs(emp.masses - ref).sum())


def density_bin_masses(density: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, npts: int = 40) -> np.ndarray:
    """Integrate a Lebesgue density over each bin (Gauss-Legendre per bin)."""
    from .quadrature import interval_rule

    out = np.empty(len(edges) - 1)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        x, w = interval_rule(float(lo), float(hi), npts)
        out[i] = float(np.dot(w, density(x)))
    return out


# ---------------------------------------------------------------------------
# transition-density cross-check against the spectral kernel


@dataclass(frozen=True)
class TransitionReport:
    l1: float
    envelope_pass: bool | None
    checked_bins: int
    x0: float
    t: float


def transition_check(
    sde: SimplexSDE,
    t: float,
    eig,
    edges: np.ndarray,
    envelope=None,
    domain=None,
    min_hits: int = 50,
) -> TransitionReport:
    """Empirical time-t law from a fixed start versus the kernel row p_t(x0, .).

    The reference bin masses come from the spectral kernel row integrated
    against the measure.  With an upper-envelope fit and its domain given,
    empirical bin densities (with at least ``min_hits`` samples) are also
    checked against the Gaussian bound pointwise.
    """
    from .heat_semigroup import heat_kernel

    if sde.n != 1:
        raise DomainError("transition checks support the one-dimensional diffusion")
    steps_to_t = int(round(t / sde.dt))
    if abs(steps_to_t * sde.dt - t) > 1e-9 * t or steps_to_t < 1:
        raise DomainError("t must be an integral number of dt steps")
    if steps_to_t > sde.steps:
        raise DomainError("sde horizon does not reach the requested time")
    run = simulate(
        SimplexSDE(
            n=1,
            drift=sde.drift,
            dt=sde.dt,
            steps=steps_to_t,
            paths=sde.paths,
            seed=sde.seed,
            initial=sde.initial,
        )
    )
    emp = empirical_stationary(run.terminal[:, 0], edges)

    disc = eig.disc
    nodes = disc.nodes
    x0 = float(np.atleast_2d(np.asarray(sde.initial, dtype=float))[0, 0])
    i0 = int(np.argmin(np.abs(nodes - x0)))
    row = heat_kernel(eig, t, rows=np.array([i0]))[0]
    lumped = disc.lumped_masses()
    bin_idx = np.clip(np.searchsorted(edges, nodes, side="right") - 1, 0, len(edges) - 2)
    ref = np.zeros(len(edges) - 1)
    np.add.at(ref, bin_idx, row * lumped)
    ref = np.clip(ref, 0.0, None)
    ref /= ref.sum()

    l1 = l1_distance(emp, ref)

    envelope_pass: bool | None = None
    checked = 0
    if envelope is not None and domain is not None:
        counts = emp.masses * emp.path_count
        sq = math.sqrt(t)
        mu_x0 = domain.ball_mass(x0, sq)
        envelope_pass = True
        for b in range(len(edges) - 1):
            if counts[b] < min_hits:
                continue
            checked += 1
            mid = 0.5 * (edges[b] + edges[b + 1])
            mu_bin = domain.ball_mass(mid, sq)
            sel = bin_idx == b
            mu_bin_total = float(lumped[sel].sum())
            if mu_bin_total <= 0:
                continue
            emp_density = emp.masses[b] / mu_bin_total
            rho = float(domain.distance(x0, mid))
            bound = (
                envelope.C0
                * math.exp(-(rho**2) / (envelope.C2 * t))
                / math.sqrt(mu_x0 * mu_bin)
                * (1.0 + rho / sq) ** envelope.D
            )
            if emp_density > bound:
                envelope_pass = False
    return TransitionReport(l1=l1, envelope_pass=envelope_pass, checked_bins=checked, x0=x0, t=t)
