"""Numerical toolkit for degenerate Kimura-type diffusion operators.

Quantitative probes for the objects controlling these diffusions: weighted
corner measures and their doubling behaviour, Bessel-root Poincare constants,
weighted finite-element spectra, heat kernels with Gaussian envelopes,
parabolic Harnack and Hoelder diagnostics, formal log-series stationary
expansions, and Wright-Fisher path simulation.
"""

from .bessel_poincare import phi, poincare_1d, poincare_product, zeta1
from .corner_geometry import (
    Ball,
    WeightedMeasure,
    WeightSpec,
    ball_mass,
    ball_mass_1d_const,
    doubling_ratio,
    estimate_doubling_dimension,
    intrinsic_distance,
)
from .discretization import (
    DiscreteOperator,
    EigenDecomposition,
    GridSpec,
    KimuraOperator1D,
    assemble,
    assemble_2d,
    drift_to_weights,
    eigs,
    jacobi_exact_spectrum,
    neumann_segment,
    stationary_density,
)
from .harnack import (
    HarnackWindow,
    HoelderFit,
    harnack_ratio,
    harnack_scale_stability,
    holder_blowup,
    holder_exponent,
    singular_inequality_constant,
)
from .heat_semigroup import (
    HeatKernelGrid,
    heat_kernel,
    heat_trace,
    solve_parabolic,
    weyl_counting,
    weyl_fit,
)
from .stationary_series import LogSeries, apply_adjoint, solve_expansion
from .wright_fisher import SimplexSDE, empirical_stationary, simulate, transition_check

__version__ = "0.1.0"
