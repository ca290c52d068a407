import math

import numpy as np
import pytest

from kimura.discretization import (
    GridSpec,
    KimuraOperator1D,
    assemble,
    eigs,
    neumann_segment,
)
from kimura.errors import DomainError, InsufficientSpectrumError
from kimura.heat_semigroup import (
    HeatKernelGrid,
    JacobiIntervalDomain,
    SegmentDomain,
    WBallDomain,
    classical_weyl_constant,
    diagonal_comparability,
    domain_for,
    envelope_sample_slices,
    fit_lower_envelope,
    fit_upper_envelope,
    heat_kernel,
    heat_trace,
    heat_trace_diagonal,
    interval_doubling_exponent,
    kernel_positivity,
    metric_uniform_sample,
    reliable_t_min,
    solve_parabolic,
    weyl_counting,
    weyl_fit,
)

TIMES = np.geomspace(0.05, 0.8, 8)


@pytest.fixture(scope="module")
def jacobi_uniform():
    disc = assemble(KimuraOperator1D.unit_interval(1.0, 1.0), GridSpec(200))
    return disc, eigs(disc)


@pytest.fixture(scope="module")
def jacobi_arcsine_pair():
    out = []
    for n_el in (150, 300):
        disc = assemble(KimuraOperator1D.unit_interval(0.5, 0.5), GridSpec(n_el))
        out.append((disc, eigs(disc)))
    return out


class TestHeatKernel:
    def test_long_time_limit_is_constant_projection(self, jacobi_uniform):
        disc, dec = jacobi_uniform
        K = heat_kernel(dec, 50.0)
        # measure has total mass 1, so the projection kernel is constantly 1
        assert np.abs(K - 1.0).max() < 1e-10

    def test_row_block_matches_full_kernel(self, jacobi_uniform):
        _, dec = jacobi_uniform
        K = heat_kernel(dec, 0.3)
        rows = heat_kernel(dec, 0.3, rows=np.array([0, 5, 17]))
        assert np.allclose(K[[0, 5, 17]], rows, atol=0.0)

    def test_rejects_nonpositive_time(self, jacobi_uniform):
        _, dec = jacobi_uniform
        with pytest.raises(DomainError):
            heat_kernel(dec, 0.0)

    def test_conservation_symmetry_semigroup(self, jacobi_uniform):
        disc, dec = jacobi_uniform
        dom = JacobiIntervalDomain(1.0, 1.0)
        sample = metric_uniform_sample(disc, dom, 15)
        grid = HeatKernelGrid.build(dec, [0.1, 0.2, 0.4], sample)
        assert grid.conservation_residual() < 1e-8
        assert grid.symmetry_residual() < 1e-12
        assert grid.semigroup_residual() < 1e-8

    def test_reliable_t_min_reported(self, jacobi_uniform):
        _, dec = jacobi_uniform
        t_min = reliable_t_min(dec)
        assert 0.0 < t_min < 1e-3


class TestTrace:
    def test_trace_matches_series_oracle(self):
        # oracle: sum over n of exp(-n(n+1) t); the residual is the eigenvalue
        # discretization error, measured at 6.3e-5 for 1000 elements
        t = 0.05
        series = sum(math.exp(-n * (n + 1) * t) for n in range(400))
        disc = assemble(KimuraOperator1D.unit_interval(1.0, 1.0), GridSpec(1000))
        dec = eigs(disc)
        assert heat_trace(dec, t) == pytest.approx(series, abs=1.5e-4)
        assert heat_trace_diagonal(dec, t) == pytest.approx(series, abs=1.5e-4)

    def test_diagonal_route_consistent_with_spectral_sum(self, jacobi_uniform):
        _, dec = jacobi_uniform
        for t in (0.05, 0.3):
            assert heat_trace_diagonal(dec, t) == pytest.approx(heat_trace(dec, t), rel=1e-9)


@pytest.fixture(scope="module")
def slices(jacobi_arcsine_pair):
    (disc_c, dec_c), (disc_f, dec_f) = jacobi_arcsine_pair
    dom = JacobiIntervalDomain(0.5, 0.5)
    grid_c = HeatKernelGrid.build(dec_c, TIMES, metric_uniform_sample(disc_c, dom, 16))
    grid_f = HeatKernelGrid.build(dec_f, TIMES, metric_uniform_sample(disc_f, dom, 16))
    return envelope_sample_slices(grid_f, grid_c, dom)


class TestEnvelopes:
    def test_upper_fit_finite_and_stable(self, slices):
        fit = fit_upper_envelope(slices, interval_doubling_exponent(0.5, 0.5))
        assert fit.passed
        assert 0.0 < fit.params.C0 < 100.0
        assert fit.params.C2 == 4.0 and fit.params.C1 == 0.0 and fit.params.eta == 0.0

    def test_diagonal_specialization(self, slices):
        # on the diagonal the Gaussian factor is 1, so the normalized diagonal
        # itself must stay below the fitted constant
        fit = fit_upper_envelope(slices, interval_doubling_exponent(0.5, 0.5))
        sup, inf = diagonal_comparability(slices)
        assert sup <= fit.params.C0 + 1e-12
        assert inf > 0.0

    def test_lower_fit_finite_and_stable(self, slices):
        fit = fit_lower_envelope(slices)
        assert fit.passed
        assert fit.params.C0 > 0.0
        sup, inf = diagonal_comparability(slices)
        # diagonal specialization: p_t(x,x) mu(B) >= 1/C
        assert inf >= 1.0 / fit.params.C0 - 1e-12

    def test_positivity_above_noise_floor(self, slices):
        ok, worst = kernel_positivity(slices)
        assert ok
        assert worst > -10.0

    def test_neumann_interval_diagonal_matches_reflection_oracle(self):
        # classical Neumann kernel by reflection: p_t(x,x) ~ 1/sqrt(4 pi t)
        # in the interior, so p_t(x,x) mu(B_sqrt(t)) ~ 2/sqrt(4 pi)
        L = 2.0
        t = 0.01
        dom = SegmentDomain(0.0, L)
        grids = []
        for n_el in (200, 400):
            disc = neumann_segment(0.0, L, n_el)
            dec = eigs(disc)
            grids.append(HeatKernelGrid.build(dec, [t], metric_uniform_sample(disc, dom, 21)))
        slices = envelope_sample_slices(grids[1], grids[0], dom)
        s = slices[0]
        mid = len(s.xs) // 2
        x = s.xs[mid]

        def reflection_diag(x):
            tot = 0.0
            for k in range(-30, 31):
                for z in (2 * k * L, 2 * x + 2 * k * L):
                    tot += math.exp(-z * z / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
            return tot

        oracle = reflection_diag(x) * dom.ball_mass(x, math.sqrt(t))
        assert oracle == pytest.approx(2.0 / math.sqrt(4.0 * math.pi), rel=1e-6)
        assert s.normalized[mid, mid] == pytest.approx(oracle, rel=0.02)


class TestWeyl:
    def test_counting_function(self):
        lam = np.array([0.0, 2.0, 6.0, 12.0])
        assert weyl_counting(lam, 0.0) == 1
        assert weyl_counting(lam, 5.0) == 2
        assert weyl_counting(lam, 100.0) == 4

    def test_classical_constant_interval(self):
        # Vol_g = pi for the unit interval; in 1D the constant is exactly 1
        assert classical_weyl_constant(math.pi, 1) == pytest.approx(1.0, rel=1e-14)

    def test_fit_uniform_weights(self):
        fine = eigs(assemble(KimuraOperator1D.unit_interval(1.0, 1.0), GridSpec(600)))
        coarse = eigs(assemble(KimuraOperator1D.unit_interval(1.0, 1.0), GridSpec(300)))
        report = weyl_fit(fine, coarse, d=1, symbol_volume=math.pi)
        assert report.relative_deviation < 0.05
        assert report.note
        counts = report.counting[1]
        assert np.all(np.diff(counts) >= 0)

    def test_insufficient_spectrum_raises(self):
        disc = neumann_segment(0.0, 1.0, 8)
        dec = eigs(disc)
        with pytest.raises(InsufficientSpectrumError):
            weyl_fit(dec, dec, d=1, symbol_volume=1.0, reliable_rtol=0.0)


class TestParabolic:
    def test_constant_initial_stays_constant(self, jacobi_uniform):
        disc, _ = jacobi_uniform
        traj = solve_parabolic(disc, np.ones(disc.n_dofs), 0.5, 50)
        assert np.abs(traj.states - 1.0).max() < 1e-12

    def test_eigenmode_decay(self, jacobi_uniform):
        disc, dec = jacobi_uniform
        lam1 = dec.eigenvalues[1]
        psi1 = dec.eigenvectors[:, 1]
        t_end = 0.1
        traj = solve_parabolic(disc, psi1, t_end, 2000)
        expect = math.exp(-lam1 * t_end) * psi1
        assert np.abs(traj.states[-1] - expect).max() < 1e-6

    def test_mass_conserved(self, jacobi_uniform):
        disc, _ = jacobi_uniform
        rng = np.random.default_rng(3)
        u0 = rng.uniform(0.0, 1.0, disc.n_dofs)
        traj = solve_parabolic(disc, u0, 0.3, 60)
        masses = traj.states @ (disc.mass @ np.ones(disc.n_dofs))
        assert np.abs(masses - masses[0]).max() < 1e-10

    def test_nonnegative_data_stays_nonnegative_within_tolerance(self, jacobi_uniform):
        disc, _ = jacobi_uniform
        rng = np.random.default_rng(11)
        u0 = np.clip(rng.normal(1.0, 0.5, disc.n_dofs), 0.0, None)
        traj = solve_parabolic(disc, u0, 0.2, 200)
        assert traj.states.min() > -1e-10 * traj.states.max()

    def test_matches_spectral_propagation(self, jacobi_uniform):
        disc, dec = jacobi_uniform
        nodes = disc.nodes
        u0 = np.sin(2.0 * math.pi * nodes) + 1.0
        t_end = 0.2
        traj = solve_parabolic(disc, u0, t_end, 4000)
        K = heat_kernel(dec, t_end)
        spectral = K @ (disc.mass @ u0)
        assert np.abs(traj.states[-1] - spectral).max() < 1e-6

    def test_domain_adapter_selection(self):
        assert isinstance(domain_for(KimuraOperator1D.unit_interval(1.0, 2.0)), JacobiIntervalDomain)
        assert isinstance(domain_for(KimuraOperator1D.w_ball(0.5, 0.0, 1.0)), WBallDomain)
        assert isinstance(domain_for(KimuraOperator1D.segment(0.0, 1.0)), SegmentDomain)
