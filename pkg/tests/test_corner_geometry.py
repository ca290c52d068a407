import math

import numpy as np
import pytest
from scipy.integrate import quad

from kimura.corner_geometry import (
    Ball,
    DoublingSweep,
    WeightedMeasure,
    WeightSpec,
    ball_mass,
    ball_mass_1d_const,
    doubling_ratio,
    estimate_doubling_dimension,
    euclid_distance_w,
    intrinsic_distance,
    sup_distance_w,
    unit_interval_distance,
)
from kimura.errors import DomainError


def ramp_weight(slope=0.25, base=1.0):
    # C^2 radial ramp, constant past radius 1 (hence past sup-norm radius 1);
    # Lipschitz with constant <= 1.875*slope, so the log-modulus bound holds
    # with C = 1.875*slope*sup(rho |log rho|) <= 1.875*slope/e.
    def b(w, y):
        pts = np.concatenate([w, y], axis=-1)
        u = np.minimum(np.sum(pts * pts, axis=-1), 1.0)
        return base + slope * (u * u * u * (10.0 - 15.0 * u + 6.0 * u * u))

    return WeightSpec(
        weight_fns=(b,),
        beta0=base,
        upper=base + slope,
        constancy_radius=1.0,
        log_modulus=1.875 * slope * math.exp(-1) + 1e-6,
    )


class TestBallMass1dConst:
    def test_lebesgue_unit(self):
        assert ball_mass_1d_const(0.5, 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_linear_weight_from_corner(self):
        assert ball_mass_1d_const(1.0, 0.0, 2.0) == pytest.approx(2.0, abs=1e-14)

    def test_interior_ball_matches_quadrature_oracle(self):
        # oracle: integral of w^(2b-1) over [2, 4]
        oracle, err = quad(lambda w: w, 2.0, 4.0)
        assert err < 1e-12
        assert ball_mass_1d_const(1.0, 3.0, 1.0) == pytest.approx(oracle, rel=1e-14)
        assert oracle == pytest.approx(6.0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            ball_mass_1d_const(-1.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            ball_mass_1d_const(1.0, 0.0, 0.0)


class TestBallMass:
    def test_product_of_lebesgue_factors(self):
        meas = WeightedMeasure(WeightSpec.constant([0.5]), m=1)
        mass = ball_mass(meas, Ball((0.0,), (0.0,), 1.0))
        assert mass == pytest.approx(2.0, rel=1e-12)

    def test_linear_weight_half_mass(self):
        meas = WeightedMeasure(WeightSpec.constant([1.0]), m=0)
        mass = ball_mass(meas, Ball((0.0,), (), 1.0))
        assert mass == pytest.approx(0.5, rel=1e-12)

    def test_variable_weight_against_adaptive_oracle(self):
        # oracle: high-order adaptive 1D quadrature of w^(2b(w)-1)
        def bw(w):
            return 1.0 + 0.25 * min(w, 1.0)

        oracle, err = quad(lambda w: w ** (2.0 * bw(w) - 1.0), 0.0, 0.5, epsabs=1e-13)
        assert err < 1e-9
        spec = WeightSpec(
            weight_fns=(lambda w, y: 1.0 + 0.25 * np.minimum(w[..., 0], 1.0),),
            beta0=1.0,
            upper=1.25,
            constancy_radius=1.0,
            log_modulus=0.25 * math.exp(-1) + 1e-6,
        )
        mass = ball_mass(WeightedMeasure(spec, m=0), Ball((0.0,), (), 0.5), rtol=1e-10)
        assert mass == pytest.approx(oracle, abs=1e-8)

    def test_constant_weight_quadrature_matches_closed_form_sweep(self):
        for bvals, m in [((0.5,), 0), ((1.0, 2.0), 0), ((0.75,), 1)]:
            meas = WeightedMeasure(WeightSpec.constant(bvals), m=m)
            for center_scale in (0.0, 0.3, 2.0):
                for r in (0.1, 1.0, 7.5):
                    cw = tuple(center_scale * (i + 1) for i in range(len(bvals)))
                    cy = tuple(0.5 * center_scale for _ in range(m))
                    closed = math.prod(
                        ball_mass_1d_const(b, w, r) for b, w in zip(bvals, cw)
                    ) * (2.0 * r) ** m
                    quadv = ball_mass(meas, Ball(cw, cy, r))
                    assert quadv == pytest.approx(closed, rel=1e-8)

    def test_mass_strictly_increasing_in_radius(self):
        meas = WeightedMeasure(ramp_weight(), m=1)
        radii = [0.05, 0.1, 0.4, 0.9, 2.0]
        masses = [ball_mass(meas, Ball((0.3,), (0.2,), r), rtol=1e-8) for r in radii]
        assert all(b > a for a, b in zip(masses, masses[1:]))

    def test_zero_radius_gives_zero_mass(self):
        meas = WeightedMeasure(WeightSpec.constant([1.0]), m=0)
        assert ball_mass(meas, Ball((1.0,), (), 0.0)) == 0.0

    def test_u_factor_scales_mass(self):
        meas = WeightedMeasure(
            WeightSpec.constant([1.0]),
            m=0,
            u_factor=lambda w, y: np.full(w.shape[:-1], math.log(3.0)),
        )
        assert ball_mass(meas, Ball((0.0,), (), 1.0)) == pytest.approx(1.5, rel=1e-12)


class TestDoubling:
    def test_r_squared_scaling(self):
        meas = WeightedMeasure(WeightSpec.constant([1.0]), m=0)
        for r in (0.1, 1.0, 10.0):
            assert doubling_ratio(meas, (0.0,), (), r) == pytest.approx(4.0, rel=1e-10)

    def test_lebesgue_in_both_factors(self):
        meas = WeightedMeasure(WeightSpec.constant([0.5]), m=1)
        assert doubling_ratio(meas, (0.0,), (0.0,), 0.7) == pytest.approx(4.0, rel=1e-10)

    def test_interior_center_closed_form(self):
        # mu(B_2)/mu(B_1) at w=3 for b=1: 12/6, cross-checked in closed form
        meas = WeightedMeasure(WeightSpec.constant([1.0]), m=0)
        closed = ball_mass_1d_const(1.0, 3.0, 2.0) / ball_mass_1d_const(1.0, 3.0, 1.0)
        assert closed == pytest.approx(2.0)
        assert doubling_ratio(meas, (3.0,), (), 1.0) == pytest.approx(closed, rel=1e-10)

    def test_zero_radius_rejected(self):
        meas = WeightedMeasure(WeightSpec.constant([1.0]), m=0)
        with pytest.raises(DomainError):
            doubling_ratio(meas, (0.0,), (), 0.0)


class TestDoublingDimension:
    def test_corner_dominates_for_linear_weight(self):
        meas = WeightedMeasure(WeightSpec.constant([1.0]), m=0)
        sweep = DoublingSweep(
            centers=(((0.0,), ()), ((1.0,), ()), ((3.0,), ())),
            radii=(0.1, 1.0, 10.0),
        )
        D, (center, _r) = estimate_doubling_dimension(meas, sweep)
        assert D == pytest.approx(2.0, abs=1e-9)
        assert center == ((0.0,), ())

    def test_two_corner_directions(self):
        meas = WeightedMeasure(WeightSpec.constant([1.0, 1.0]), m=0)
        sweep = DoublingSweep.default(meas, radius_octaves=3)
        D, _ = estimate_doubling_dimension(meas, sweep)
        assert D == pytest.approx(4.0, abs=1e-9)

    def test_pure_tangential_plane(self):
        meas = WeightedMeasure(WeightSpec.constant([]), m=2)
        sweep = DoublingSweep.default(meas, radius_octaves=2)
        D, _ = estimate_doubling_dimension(meas, sweep)
        assert D == pytest.approx(2.0, abs=1e-12)

    def test_variable_weight_sweep_is_finite_and_bounded(self):
        spec = ramp_weight()
        meas = WeightedMeasure(spec, m=1)
        sweep = DoublingSweep.default(meas, radius_octaves=6)
        D, _ = estimate_doubling_dimension(meas, sweep, rtol=1e-7)
        assert math.isfinite(D)
        # sampled exponent must stay under the uniformity budget 2 n B + m + 2
        assert 2.0**D < 2.0 ** (2 * spec.n * spec.upper + meas.m + 2)

    def test_sweep_matches_jobs_parallel(self):
        meas = WeightedMeasure(WeightSpec.constant([0.5]), m=1)
        sweep = DoublingSweep.default(meas, radius_octaves=2)
        serial = estimate_doubling_dimension(meas, sweep)
        parallel = estimate_doubling_dimension(meas, sweep, jobs=4)
        assert serial == parallel


class TestDistances:
    def test_one_dimensional_anchor(self):
        assert intrinsic_distance([0.0], [1.0]) == pytest.approx(1.0)

    def test_corner_to_interior_with_tangential(self):
        assert intrinsic_distance([0.0], [1.0], [0.0], [1.0]) == pytest.approx(math.sqrt(2.0))

    def test_vanishes_only_at_equal_points(self):
        assert intrinsic_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert intrinsic_distance([0.3], [0.300001]) > 0.0

    def test_negative_coordinate_rejected(self):
        with pytest.raises(DomainError):
            intrinsic_distance([-0.1], [0.0])

    def test_triangle_inequality_on_grid(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.0, 2.0, size=(12, 2))
        for p in pts:
            for q in pts:
                for s in pts:
                    dpq = intrinsic_distance(p, q)
                    assert dpq <= intrinsic_distance(p, s) + intrinsic_distance(s, q) + 1e-12

    def test_metric_sandwich_in_w_coordinates(self):
        rng = np.random.default_rng(11)
        dim = 3
        for _ in range(50):
            p = rng.uniform(-1.0, 2.0, size=dim)
            q = rng.uniform(-1.0, 2.0, size=dim)
            dsup = sup_distance_w(p, q)
            de = euclid_distance_w(p, q)
            assert dsup <= de + 1e-15
            assert de <= math.sqrt(dim) * dsup + 1e-15

    def test_unit_interval_distance_endpoints(self):
        assert unit_interval_distance(0.0, 1.0) == pytest.approx(math.pi)
        assert unit_interval_distance(0.0, 0.25) == pytest.approx(math.pi / 3.0)


class TestWeightSpecInvariants:
    def test_bounds_checked_on_samples(self):
        spec = ramp_weight()
        w = np.linspace(0.0, 3.0, 7)[:, None]
        y = np.linspace(-2.0, 2.0, 7)[:, None]
        spec.check_samples(w, y)

    def test_bad_bounds_detected(self):
        spec = WeightSpec(
            weight_fns=(lambda w, y: np.full(w.shape[:-1], 5.0),),
            beta0=1.0,
            upper=2.0,
        )
        with pytest.raises(DomainError):
            spec.check_samples(np.array([[1.0]]), np.zeros((1, 0)))
