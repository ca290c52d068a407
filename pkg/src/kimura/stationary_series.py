"""Formal log-series algebra for the stationary measure near a variable-weight face.

For the planar operator ``L = x d_xx + d_yy + b(y) d_x`` with weight b(y) > 0,
the stationary measure against ``x^(b(y)-1) dx dy`` carries corrections

    nu ~ [ 1 + sum_(j>=1) sum_(k<=2j) phi_jk(y) x^j log^k x ] x^(b(y)-1) dx dy.

This module implements the closed algebra of truncated sums
``sum c_jk(y) x^j log^k x`` under multiplication and differentiation, the
formal adjoint action producing the stationarity residual, and the
order-by-order solver for the coefficients phi_jk as exact rational
expressions in b and its derivatives.  Numeric evaluation happens only at the
very end (substitute a concrete b(y), then a concrete y).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import sympy as sp

from .errors import DomainError, SeriesInvariantError

Y = sp.Symbol("y", real=True)


def generic_weight() -> sp.Expr:
    """The undetermined positive weight b(y) used for symbolic identities."""
    return sp.Function("b", positive=True)(Y)


def _zero() -> sp.Expr:
    return sp.Integer(0)


@dataclass(frozen=True)
class LogSeries:
    """Truncated formal sum sum_(j,k) c_jk(y) x^j log^k x.

    Measure expansions live in the triangular class k <= 2j; differentiation
    in x can leave it (d/dx of x log^2 x carries log^2 x), so triangularity is
    a checked property rather than a constructor constraint.  Coefficients are
    sympy expressions in y (rational in the weight symbol and its derivatives
    when built symbolically); arithmetic is exact.
    """

    terms: Mapping[tuple[int, int], sp.Expr]
    max_order: int

    def __post_init__(self):
        clean = {}
        for (j, k), c in self.terms.items():
            if j < 0 or k < 0:
                raise SeriesInvariantError(f"negative power pair ({j}, {k})")
            if j > self.max_order:
                continue
            expr = sp.sympify(c)
            if expr != 0:
                clean[(j, k)] = expr
        object.__setattr__(self, "terms", clean)

    @property
    def is_triangular(self) -> bool:
        return all(k <= 2 * j for (j, k) in self.terms)

    def require_triangular(self, context: str) -> "LogSeries":
        for (j, k) in self.terms:
            if k > 2 * j:
                raise SeriesInvariantError(
                    f"{context}: log power {k} at x^{j} exceeds the triangular bound {2 * j}"
                )
        return self

    @classmethod
    def one(cls, max_order: int) -> "LogSeries":
        return cls({(0, 0): sp.Integer(1)}, max_order)

    def coeff(self, j: int, k: int) -> sp.Expr:
        return self.terms.get((j, k), _zero())

    def is_zero(self) -> bool:
        return all(sp.simplify(c) == 0 for c in self.terms.values())

    def order_block(self, j: int) -> dict[int, sp.Expr]:
        return {k: c for (jj, k), c in self.terms.items() if jj == j}

    def equals(self, other: "LogSeries") -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(sp.simplify(self.coeff(*key) - other.coeff(*key)) == 0 for key in keys)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (j, k) in sorted(self.terms):
            c = sp.simplify(self.terms[(j, k)])
            piece = f"({c})"
            if j:
                piece += f"*x^{j}"
            if k:
                piece += f"*log(x)^{k}"
            parts.append(piece)
        return " + ".join(parts)


def series_mul(a: LogSeries, b: LogSeries, max_order: int | None = None) -> LogSeries:
    """Exact product, truncated beyond x^max_order."""
    J = min(a.max_order, b.max_order) if max_order is None else max_order
    out: dict[tuple[int, int], sp.Expr] = {}
    for (j1, k1), c1 in a.terms.items():
        for (j2, k2), c2 in b.terms.items():
            if j1 + j2 > J:
                continue
            key = (j1 + j2, k1 + k2)
            out[key] = sp.expand(out.get(key, _zero()) + c1 * c2)
    return LogSeries(out, J)


def series_diff_x(a: LogSeries, max_order: int | None = None) -> LogSeries:
    """d/dx (x^j log^k x) = j x^(j-1) log^k x + k x^(j-1) log^(k-1) x, termwise."""
    J = a.max_order if max_order is None else max_order
    out: dict[tuple[int, int], sp.Expr] = {}
    for (j, k), c in a.terms.items():
        if j == 0:
            continue  # constants die; k <= 2j forces k = 0 here
        for key, factor in (((j - 1, k), sp.Integer(j)), ((j - 1, k - 1), sp.Integer(k))):
            if key[1] < 0:
                continue
            out[key] = sp.expand(out.get(key, _zero()) + factor * c)
    return LogSeries(out, J)


def series_diff_y(a: LogSeries, max_order: int | None = None) -> LogSeries:
    """Coefficient-wise d/dy (does not touch the x^j log^k x frame)."""
    J = a.max_order if max_order is None else max_order
    out = {key: sp.diff(c, Y) for key, c in a.terms.items()}
    return LogSeries(out, J)


def series_log_raise(a: LogSeries, amount: int = 1) -> LogSeries:
    """Multiply by log^amount x; the caller must keep the result triangular.

    This is how the y-derivative of the prefactor x^(b(y)-1) enters: each d_y
    hitting the exponent contributes b'(y) log x.
    """
    out = {(j, k + amount): c for (j, k), c in a.terms.items()}
    return LogSeries(out, a.max_order)


def apply_adjoint(series: LogSeries, b: sp.Expr | None = None, max_order: int | None = None) -> LogSeries:
    """Residual R of stationarity: L^t(F x^(b-1)) = R x^(b-2), order by order.

    The adjoint of ``L = x d_xx + d_yy + b(y) d_x`` acts on densities as
    ``d_xx(x g) + d_yy g - d_x(b g)``; with g = F x^(b-1) the x-part of a term
    phi x^j log^k contributes at order j of R,

        phi [ j(j+b-1) log^k + k(2j+b-1) log^(k-1) + k(k-1) log^(k-2) ],

    and the y-part (with the log-raising action of d_y on the prefactor)
    contributes at order j+1,

        phi'' log^k + (2 b' phi' + b'' phi) log^(k+1) + b'^2 phi log^(k+2).

    The weight exponent annihilates the leading order by itself: a nonzero
    order-0 residual means a malformed seed and raises.
    """
    if b is None:
        b = generic_weight()
    series.require_triangular("adjoint input")
    # one order beyond the input is still complete: the missing higher blocks
    # of a truncated series contribute nothing there
    J = series.max_order + 1 if max_order is None else max_order
    if J < 1:
        raise DomainError("adjoint residual needs truncation order >= 1")
    bp = sp.diff(b, Y)
    bpp = sp.diff(b, Y, 2)
    out: dict[tuple[int, int], sp.Expr] = {}

    def add(j: int, k: int, expr: sp.Expr):
        if expr == 0 or j > J or k < 0:
            return
        out[(j, k)] = sp.expand(out.get((j, k), _zero()) + expr)

    for (j, k), c in series.terms.items():
        # x-part of the adjoint at residual order j
        add(j, k, c * j * (j + b - 1))
        add(j, k - 1, c * k * (2 * j + b - 1))
        add(j, k - 2, c * k * (k - 1))
        # y-part at residual order j + 1
        add(j + 1, k, sp.diff(c, Y, 2))
        add(j + 1, k + 1, 2 * bp * sp.diff(c, Y) + bpp * c)
        add(j + 1, k + 2, bp**2 * c)

    residual = LogSeries(out, J).require_triangular("adjoint residual")
    for k, c in residual.order_block(0).items():
        if sp.simplify(c) != 0:
            raise DomainError(
                "seed series is not annihilated at leading order "
                f"(order-0 log^{k} residual {c}); the weight must kill order x^-1"
            )
    return residual


def solve_expansion(
    b: sp.Expr | None = None,
    max_order: int = 2,
    seed: LogSeries | None = None,
) -> LogSeries:
    """Determine the correction coefficients phi_jk order by order.

    At residual order p the unknown block phi_p solves, from the top log power
    k = 2p downward,

        p(p+b-1) phi_pk = -[ (k+1)(2p+b-1) phi_p,k+1 + (k+2)(k+1) phi_p,k+2
                             + f_(p-1),k ],

    with f the y-part forcing of the previous block.  Re-solving with the
    solution as seed reproduces it (the system is triangular, not iterative).
    """
    if b is None:
        b = generic_weight()
    if max_order < 1:
        raise DomainError("expansion order must be >= 1")
    if seed is not None and sp.simplify(seed.coeff(0, 0) - 1) != 0:
        raise DomainError("expansion is anchored at leading coefficient 1")
    bp = sp.diff(b, Y)
    bpp = sp.diff(b, Y, 2)
    terms: dict[tuple[int, int], sp.Expr] = {(0, 0): sp.Integer(1)}
    for p in range(1, max_order + 1):
        pivot = sp.cancel(p * (p + b - 1))
        if pivot == 0:
            raise DomainError(f"resonant order p={p}: p(p+b-1) vanishes for this weight")
        prev = {k: terms.get((p - 1, k), _zero()) for k in range(0, 2 * (p - 1) + 1)}
        block: dict[int, sp.Expr] = {}
        for k in range(2 * p, -1, -1):
            forcing = (
                sp.diff(prev.get(k, _zero()), Y, 2)
                + 2 * bp * sp.diff(prev.get(k - 1, _zero()), Y)
                + bpp * prev.get(k - 1, _zero())
                + bp**2 * prev.get(k - 2, _zero())
            )
            upper = (k + 1) * (2 * p + b - 1) * block.get(k + 1, _zero())
            upper2 = (k + 2) * (k + 1) * block.get(k + 2, _zero())
            block[k] = sp.cancel(sp.together(-(forcing + upper + upper2) / pivot))
        for k, c in block.items():
            if c != 0:
                terms[(p, k)] = c
    return LogSeries(terms, max_order)


# ---------------------------------------------------------------------------
# published first-order closed forms and the cross-check against the solver


def first_order_reference(b: sp.Expr | None = None) -> dict[tuple[int, int], sp.Expr]:
    """Reference closed forms for the j = 1 block as previously reported."""
    if b is None:
        b = generic_weight()
    bp = sp.diff(b, Y)
    bpp = sp.diff(b, Y, 2)
    return {
        (1, 2): -(bp**2) / b,
        (1, 1): bpp / b - 2 * (bp / b) ** 2,
        (1, 0): (1 + b) * bpp / b**2 - 2 * (2 + b) * bp**2 / b**3,
    }


@dataclass(frozen=True)
class CoefficientComparison:
    index: tuple[int, int]
    matches: bool
    solved: sp.Expr
    reference: sp.Expr
    residual_with_reference: sp.Expr


def compare_first_order(b: sp.Expr | None = None) -> list[CoefficientComparison]:
    """Solve the j = 1 block and compare each coefficient with the reference table.

    Mismatches are reported with both expressions and the stationarity
    residual left behind by the reference value; nothing is suppressed.
    """
    if b is None:
        b = generic_weight()
    solution = solve_expansion(b, max_order=1)
    reference = first_order_reference(b)
    out = []
    for key in sorted(reference, reverse=True):
        solved = solution.coeff(*key)
        ref = reference[key]
        diff = sp.simplify(sp.together(solved - ref))
        # residual the reference coefficient leaves in its own defining equation
        ref_series = LogSeries(
            {(0, 0): sp.Integer(1), **{k: v for k, v in reference.items()}}, 1
        )
        resid = apply_adjoint(ref_series, b).coeff(1, key[1])
        out.append(
            CoefficientComparison(
                index=key,
                matches=diff == 0,
                solved=solved,
                reference=ref,
                residual_with_reference=sp.simplify(resid),
            )
        )
    return out


# ---------------------------------------------------------------------------
# evaluation and export


def evaluate_coefficients(
    series: LogSeries, b_expr: sp.Expr, y_value: float | sp.Expr
) -> dict[tuple[int, int], sp.Expr]:
    """Substitute a concrete weight (expression in y) and a y value.

    The series must have been solved with the same ``b_expr`` (or with the
    generic weight, in which case the generic symbol is replaced first).
    """
    gen = generic_weight()
    out = {}
    for key, c in series.terms.items():
        expr = c
        if expr.has(gen.func):
            expr = expr.replace(gen.func(Y), b_expr).doit()
        out[key] = sp.nsimplify(sp.simplify(expr.subs(Y, y_value)))
    return out


def series_to_text(series: LogSeries) -> str:
    lines = [f"truncation order J = {series.max_order}"]
    for (j, k) in sorted(series.terms):
        lines.append(f"x^{j} log^{k}: {sp.simplify(series.terms[(j, k)])}")
    return "\n".join(lines)


def series_to_json(series: LogSeries) -> str:
    payload = {
        "max_order": series.max_order,
        "terms": [
            {"x_power": j, "log_power": k, "coefficient": str(sp.simplify(c))}
            for (j, k), c in sorted(series.terms.items())
        ],
    }
    return json.dumps(payload, indent=2)
