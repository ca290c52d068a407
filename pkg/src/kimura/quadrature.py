"""Gauss-Legendre and Gauss-Jacobi rules on subintervals.

Power-law factors ``(x - a)^ga * (c - x)^gc`` attached to an interval's
endpoints are absorbed into the quadrature weights, so integrands handed
to these rules only contain the remaining smooth part.  This is how the
toolkit integrates densities such as ``w^(2b-1)`` exactly through the
endpoint singularity instead of sampling it.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import DomainError


@lru_cache(maxsize=256)
def _reference_rule(npts: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights for integral over [-1, 1] of (1-t)^alpha (1+t)^beta f(t) dt
    t, w = roots_jacobi(npts, alpha, beta)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def interval_rule(
    a: float,
    c: float,
    npts: int = 6,
    left_exponent: float = 0.0,
    right_exponent: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for ``integral over [a,c] of (x-a)^gL (c-x)^gR f(x) dx``.

    Returns nodes and weights with the power factors folded into the
    weights; exponents must exceed -1 for integrability.
    """
    if not c > a:
        raise DomainError(f"empty interval [{a}, {c}]")
    if left_exponent <= -1.0 or right_exponent <= -1.0:
        raise DomainError("power-law exponent must be > -1 for an integrable weight")
    t, w = _reference_rule(npts, right_exponent, left_exponent)
    half = 0.5 * (c - a)
    x = a + half * (t + 1.0)
    # Jacobian of the affine map plus the scale carried by each power factor.
    scale = half ** (1.0 + left_exponent + right_exponent)
    return x, w * scale


def integrate(
    f,
    a: float,
    c: float,
    npts: int = 6,
    left_exponent: float = 0.0,
    right_exponent: float = 0.0,
) -> float:
    """Convenience wrapper around :func:`interval_rule` for scalar integrands."""
    x, w = interval_rule(a, c, npts, left_exponent, right_exponent)
    return float(np.dot(w, f(x)))
