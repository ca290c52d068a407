"""Self-adjoint finite elements for 1D Kimura operators and S_{1,1} tensors.

Discretizes the Dirichlet form pair

    Q(u, v) = integral kappa(x) u' v' dx,   (u, v) = integral u v rho(x) dx,

with piecewise-linear elements.  The densities ``rho`` and ``kappa`` carry
power-law factors at degenerate endpoints (e.g. ``x^(b0-1) (1-x)^(b1-1)`` and
``x^b0 (1-x)^b1`` on the unit interval); Gauss-Jacobi element quadrature sees
those exponents exactly, so no boundary condition is ever imposed explicitly:
constants lie in the kernel of the assembled stiffness matrix by construction.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    DomainError,
    ModelError,
    NumericalError,
    UnsupportedOperatorError,
)
from .quadrature import interval_rule


# ---------------------------------------------------------------------------
# operator descriptions


@dataclass(frozen=True)
class UTable:
    """Antisymmetric-drift correction potential, anchored at U(1/2) = 0."""

    xs: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.xs, self.values)


def _cumulative_u(u_prime: Callable[[float], float], anchor: float = 0.5) -> UTable:
    """Integrate U' outward from the anchor on a grid refining into both endpoints.

    Raises ModelError when the per-decade increments of |U| stop decaying,
    which is the signature of a log-divergent (unbounded) U.
    """
    depths = np.concatenate([np.linspace(0.0, 2.0, 41)[1:], np.arange(2.25, 12.1, 0.25)])
    offsets = anchor * 10.0 ** (-depths)

    def side(sign: int) -> tuple[np.ndarray, np.ndarray]:
        xs = anchor + sign * (anchor - offsets)
        vals = np.empty_like(xs)
        acc = 0.0
        prev = anchor
        for i, x in enumerate(xs):
            nodes, wgts = interval_rule(min(prev, x), max(prev, x), npts=8)
            seg = float(np.dot(wgts, [u_prime(t) for t in nodes]))
            acc += seg if x > prev else -seg
            vals[i] = acc
            prev = x
        return xs, vals

    xs_r, vals_r = side(+1)
    xs_l, vals_l = side(-1)
    for name, vals in (("right", vals_r), ("left", vals_l)):
        # increments of U over the last few decades toward the endpoint
        tail = np.abs(np.diff(vals[-16:]))
        if np.abs(vals[-1]) > 50.0 or (tail.min() > 0.05 and tail[-1] >= 0.5 * tail[0]):
            raise ModelError(
                f"derived drift potential U diverges toward the {name} endpoint "
                "(drift incompatible with positive boundary weights)"
            )
    xs = np.concatenate([xs_l[::-1], [anchor], xs_r])
    vals = np.concatenate([vals_l[::-1], [0.0], vals_r])
    return UTable(xs=xs, values=vals)


@dataclass(frozen=True)
class KimuraOperator1D:
    """1D degenerate operator in divergence form, described by its weights.

    kinds:
      * ``unit_interval``: x(1-x) d^2 + b(x) d on [0,1], measure
        x^(b0-1)(1-x)^(b1-1) e^U dx;
      * ``halfline``: x d^2 + b d truncated to [0, L], measure x^(b-1) dx;
      * ``w_ball``: Bessel form d^2 + (2b-1)/w d on [max(c-r,0), c+r],
        measure w^(2b-1) dw;
      * ``segment``: d^2 on [lo, hi] with Lebesgue measure (tangential factor).
    """

    kind: str
    a: float
    c: float
    b0: float
    b1: float | None = None
    u_table: UTable | None = None
    drift_fn: Callable[[float], float] | None = None

    @classmethod
    def unit_interval(cls, b0: float, b1: float, drift_fn=None) -> "KimuraOperator1D":
        if drift_fn is not None:
            b0, b1, table = drift_to_weights(drift_fn)
            return cls("unit_interval", 0.0, 1.0, b0, b1, table, drift_fn)
        if b0 <= 0 or b1 <= 0:
            raise DomainError("boundary weights must be positive")
        return cls("unit_interval", 0.0, 1.0, b0, b1)

    @classmethod
    def halfline(cls, b: float, length: float) -> "KimuraOperator1D":
        if b <= 0 or length <= 0:
            raise DomainError("need b > 0 and positive truncation length")
        return cls("halfline", 0.0, float(length), b)

    @classmethod
    def w_ball(cls, b: float, center: float, radius: float) -> "KimuraOperator1D":
        if b <= 0 or radius <= 0 or center < 0:
            raise DomainError("need b > 0, radius > 0 and nonnegative center")
        return cls("w_ball", max(center - radius, 0.0), center + radius, b)

    @classmethod
    def segment(cls, lo: float, hi: float) -> "KimuraOperator1D":
        if hi <= lo:
            raise DomainError("empty segment")
        return cls("segment", float(lo), float(hi), 1.0)

    # (left exponent, right exponent, smooth factor) for the measure density
    def _measure_parts(self):
        if self.kind == "unit_interval":
            u = self.u_table
            smooth = (lambda x: np.exp(u(x))) if u is not None else None
            return self.b0 - 1.0, self.b1 - 1.0, smooth
        if self.kind == "halfline":
            return self.b0 - 1.0, 0.0, None
        if self.kind == "w_ball":
            if self.a == 0.0:
                return 2.0 * self.b0 - 1.0, 0.0, None
            e = 2.0 * self.b0 - 1.0
            return 0.0, 0.0, (lambda x: np.asarray(x, dtype=float) ** e)
        return 0.0, 0.0, None

    # same decomposition for the stiffness coefficient kappa = A * rho
    def _stiffness_parts(self):
        gl, gr, smooth = self._measure_parts()
        if self.kind == "unit_interval":
            return gl + 1.0, gr + 1.0, smooth
        if self.kind == "halfline":
            return gl + 1.0, gr, smooth
        return gl, gr, smooth

    def measure_density(self, x):
        """Lebesgue density of the invariant measure at interior points."""
        x = np.asarray(x, dtype=float)
        gl, gr, smooth = self._measure_parts()
        out = np.ones_like(x)
        if gl != 0.0:
            out = out * (x - self.a) ** gl
        if gr != 0.0:
            out = out * (self.c - x) ** gr
        if smooth is not None:
            out = out * smooth(x)
        return out

    @property
    def grades_left(self) -> bool:
        gl, _, _ = self._measure_parts()
        return gl != 0.0

    @property
    def grades_right(self) -> bool:
        _, gr, _ = self._measure_parts()
        return gr != 0.0


def drift_to_weights(drift_fn: Callable[[float], float]) -> tuple[float, float, UTable]:
    """Split a drift b(x) on [0,1] into endpoint weights and the bounded potential U.

    In divergence form the drift decomposes as
    ``b(x) = b0 (1-x) - b1 x + x(1-x) U'(x)``, so ``b0 = b(0)`` and
    ``b1 = -b(1)`` with our orientation (inward drift at the right endpoint is
    negative).  A drift that does not point inward at x = 1 is tried with the
    magnitude |b(1)| as a weight, which the boundedness check then rejects.
    """
    b_at_0 = float(drift_fn(0.0))
    b_at_1 = float(drift_fn(1.0))
    if b_at_0 <= 0:
        raise ModelError(f"drift at 0 is {b_at_0}; a positive transverse weight requires b(0) > 0")
    b0 = b_at_0
    b1 = -b_at_1
    if b1 <= 0:
        if b_at_1 == 0.0:
            raise ModelError("drift vanishes at x = 1; the right endpoint weight would be 0")
        b1 = abs(b_at_1)

    def u_prime(x: float) -> float:
        return (drift_fn(x) - (b0 * (1.0 - x) - b1 * x)) / (x * (1.0 - x))

    table = _cumulative_u(u_prime)
    return b0, b1, table


# ---------------------------------------------------------------------------
# grids and assembly


@dataclass(frozen=True)
class GridSpec:
    """Element count plus geometric grading toward degenerate endpoints."""

    n_elements: int
    grading_ratio: float = 0.8
    max_graded: int = 24

    def __post_init__(self):
        if self.n_elements < 8:
            raise DomainError("grid needs at least 8 elements")
        if not 0.0 < self.grading_ratio <= 1.0:
            raise DomainError("grading ratio must lie in (0, 1]")


def graded_nodes(a: float, c: float, spec: GridSpec, grade_left: bool, grade_right: bool) -> np.ndarray:
    q = spec.grading_ratio
    n = spec.n_elements
    g = min(spec.max_graded, n // 4)
    gl = g if grade_left else 0
    gr = g if grade_right else 0
    n_int = n - gl - gr
    geo = lambda k: sum(q**j for j in range(1, k + 1))
    h = (c - a) / (n_int + geo(gl) + geo(gr))
    widths = (
        [h * q**j for j in range(gl, 0, -1)]
        + [h] * n_int
        + [h * q**j for j in range(1, gr + 1)]
    )
    nodes = a + np.concatenate([[0.0], np.cumsum(widths)])
    nodes[-1] = c
    return nodes


@dataclass(frozen=True)
class DiscreteOperator:
    """Assembled stiffness/mass pair on a grid (1D, or a 2D tensor product).

    The stiffness matrix annihilates constants (the natural boundary condition
    is built into the form), and both matrices are symmetric; the mass matrix
    is positive definite.
    """

    axes: tuple[np.ndarray, ...]
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    element_masses: np.ndarray
    operator: KimuraOperator1D | None = None

    @property
    def n_dofs(self) -> int:
        return self.stiffness.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        if len(self.axes) != 1:
            raise DomainError("nodes is defined for 1D operators; use axes")
        return self.axes[0]

    def lumped_masses(self) -> np.ndarray:
        return np.asarray(self.mass.sum(axis=1)).ravel()

    def total_mass(self) -> float:
        return float(self.mass.sum())


def _element_rules(a, c, nodes, gl, gr, smooth, npts_interior=4, npts_singular=6):
    """Per-element quadrature points and weights for integral rho(x) f(x) dx.

    Elements touching an endpoint with a nonzero exponent absorb it into a
    Gauss-Jacobi rule; everywhere else the power factor is evaluated directly.
    """
    out = []
    for xl, xr in zip(nodes[:-1], nodes[1:]):
        absorb_l = xl == a and gl != 0.0
        absorb_r = xr == c and gr != 0.0
        npts = npts_singular if (absorb_l or absorb_r) else npts_interior
        x, w = interval_rule(
            xl,
            xr,
            npts,
            left_exponent=gl if absorb_l else 0.0,
            right_exponent=gr if absorb_r else 0.0,
        )
        vals = np.ones_like(x)
        if not absorb_l and gl != 0.0:
            vals *= (x - a) ** gl
        if not absorb_r and gr != 0.0:
            vals *= (c - x) ** gr
        if smooth is not None:
            vals *= smooth(x)
        out.append((x, w * vals))
    return out


def assemble(op: KimuraOperator1D, grid: GridSpec) -> DiscreteOperator:
    """Piecewise-linear assembly of the (stiffness, mass) pair for ``op``."""
    nodes = graded_nodes(op.a, op.c, grid, op.grades_left, op.grades_right)
    if not np.all(np.diff(nodes) > 0):
        raise DomainError("grid nodes must be strictly increasing")
    n = len(nodes)

    gl_m, gr_m, smooth_m = op._measure_parts()
    gl_s, gr_s, smooth_s = op._stiffness_parts()
    mass_rules = _element_rules(op.a, op.c, nodes, gl_m, gr_m, smooth_m)
    stiff_rules = _element_rules(op.a, op.c, nodes, gl_s, gr_s, smooth_s)

    rows, cols, s_data, m_data = [], [], [], []
    element_masses = np.empty(n - 1)
    for e in range(n - 1):
        xl, xr = nodes[e], nodes[e + 1]
        h = xr - xl
        x_m, w_m = mass_rules[e]
        x_s, w_s = stiff_rules[e]
        k_int = float(np.sum(w_s))  # integral of kappa over the element
        phi_r = (x_m - xl) / h
        phi_l = 1.0 - phi_r
        m_ll = float(np.dot(w_m, phi_l * phi_l))
        m_lr = float(np.dot(w_m, phi_l * phi_r))
        m_rr = float(np.dot(w_m, phi_r * phi_r))
        element_masses[e] = float(np.sum(w_m))
        s = k_int / (h * h)
        for (i, j, sv, mv) in (
            (e, e, s, m_ll),
            (e, e + 1, -s, m_lr),
            (e + 1, e, -s, m_lr),
            (e + 1, e + 1, s, m_rr),
        ):
            rows.append(i)
            cols.append(j)
            s_data.append(sv)
            m_data.append(mv)

    S = sp.csr_matrix((s_data, (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((m_data, (rows, cols)), shape=(n, n))
    return DiscreteOperator(axes=(nodes,), stiffness=S, mass=M, element_masses=element_masses, operator=op)


def neumann_segment(lo: float, hi: float, n_elements: int) -> DiscreteOperator:
    """Plain Neumann Laplacian factor on [lo, hi] (the tangential direction)."""
    return assemble(KimuraOperator1D.segment(lo, hi), GridSpec(n_elements, grading_ratio=1.0))


def assemble_2d(disc_x: DiscreteOperator, disc_y: DiscreteOperator, cross_coef: float = 0.0) -> DiscreteOperator:
    """Kronecker-sum stiffness and Kronecker-product mass on a tensor grid."""
    if cross_coef != 0.0:
        raise UnsupportedOperatorError(
            "only diagonal operators x d_x^2 + b d_x + d_y^2 tensorize; cross terms are unsupported"
        )
    if len(disc_x.axes) != 1 or len(disc_y.axes) != 1:
        raise DomainError("assemble_2d expects two 1D factors")
    S = sp.kron(disc_x.stiffness, disc_y.mass) + sp.kron(disc_x.mass, disc_y.stiffness)
    M = sp.kron(disc_x.mass, disc_y.mass)
    em = np.outer(disc_x.element_masses, disc_y.element_masses).ravel()
    return DiscreteOperator(
        axes=(disc_x.axes[0], disc_y.axes[0]),
        stiffness=S.tocsr(),
        mass=M.tocsr(),
        element_masses=em,
        operator=None,
    )


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with M-orthonormal eigenvectors of S v = lambda M v."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    disc: DiscreteOperator

    @property
    def nodes(self) -> np.ndarray:
        return self.disc.nodes


def eigs(disc: DiscreteOperator, k: int | None = None) -> EigenDecomposition:
    """Dense generalized symmetric eigensolve (Cholesky reduction of M inside LAPACK)."""
    n = disc.n_dofs
    if k is None:
        k = n
    if k > n:
        raise DomainError(f"requested {k} modes from a {n}-dof operator")
    if n > 16000:
        raise NumericalError("dense eigensolve capped at 16000 dofs")
    S = disc.stiffness.toarray()
    M = disc.mass.toarray()
    try:
        w, v = scipy.linalg.eigh(S, M)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalError(f"generalized eigensolve failed: {exc}") from exc
    # deterministic sign: first nonzero component positive
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return EigenDecomposition(eigenvalues=w[:k], eigenvectors=v[:, :k], disc=disc)


def jacobi_exact_spectrum(b0: float, b1: float, n_max: int) -> list[float]:
    """Exact eigenvalues n (n + b0 + b1 - 1) of the interval operator.

    Each value is verified by constructing the degree-n polynomial
    eigenfunction explicitly and applying the differential operator to it on a
    dense grid; a sup-norm residual above 1e-9 raises.
    """
    if b0 <= 0 or b1 <= 0:
        raise DomainError("weights must be positive")
    lambdas = []
    xs = np.linspace(0.0, 1.0, 211)
    for n in range(n_max + 1):
        lam = n * (n + b0 + b1 - 1.0)
        coef = np.zeros(n + 1)
        coef[0] = 1.0
        for k in range(n):
            coef[k + 1] = coef[k] * (k * (k - 1.0 + b0 + b1) - lam) / ((k + 1.0) * (k + b0))
        p = np.polynomial.Polynomial(coef)
        scale = np.abs(p(xs)).max()
        resid = xs * (1.0 - xs) * p.deriv(2)(xs) + (b0 * (1.0 - xs) - b1 * xs) * p.deriv(1)(xs) + lam * p(xs)
        if np.abs(resid).max() > 1e-9 * max(scale, 1.0) * max(lam, 1.0):
            raise NumericalError(
                f"constructed eigenfunction for n={n} fails the residual check "
                f"(sup residual {np.abs(resid).max():.3e})"
            )
        lambdas.append(lam)
    return lambdas


def stationary_density(op: KimuraOperator1D) -> tuple[Callable[[np.ndarray], np.ndarray], float]:
    """Normalized stationary density of the operator's invariant measure.

    Returns (density, c0) with density(x) = c0 * rho(x); for the unit interval
    with U = 0 this is the Beta(b0, b1) density, c0 = 1/B(b0, b1).
    """
    gl, gr, smooth = op._measure_parts()
    x, w = interval_rule(op.a, op.c, npts=60, left_exponent=gl, right_exponent=gr)
    vals = np.ones_like(x) if smooth is None else smooth(x)
    total = float(np.dot(w, vals))
    if not math.isfinite(total) or total <= 0:
        raise DomainError("measure is not normalizable")
    c0 = 1.0 / total

    def density(xq):
        return c0 * op.measure_density(xq)

    return density, c0


# ---------------------------------------------------------------------------
# CSV export


def matrix_to_csv(matrix: sp.spmatrix) -> str:
    """Sparse matrix as 'row,col,value' triplets with a header row."""
    coo = matrix.tocoo()
    buf = io.StringIO()
    buf.write("row,col,value\n")
    for i, j, v in zip(coo.row, coo.col, coo.data):
        buf.write(f"{i},{j},{v!r}\n")
    return buf.getvalue()


def grid_to_csv(disc: DiscreteOperator) -> str:
    buf = io.StringIO()
    buf.write("axis,index,coordinate\n")
    for a, ax in enumerate(disc.axes):
        for i, x in enumerate(ax):
            buf.write(f"{a},{i},{x!r}\n")
    return buf.getvalue()
