import math

import numpy as np
import pytest
from scipy.special import betainc

from kimura.discretization import GridSpec, KimuraOperator1D, assemble, eigs
from kimura.errors import DomainError
from kimura.heat_semigroup import JacobiIntervalDomain
from kimura.wright_fisher import (
    EmpiricalDensity,
    SimplexSDE,
    TransitionReport,
    density_bin_masses,
    empirical_stationary,
    l1_distance,
    project_to_simplex,
    simplex_inradius,
    simulate,
    stationary_bins,
    transition_check,
    wright_fisher_drift,
)


def beta_masses(b0, b1, edges):
    return np.diff([betainc(b0, b1, float(e)) for e in edges])


class TestDrift:
    def test_one_dimensional_form(self):
        drift = wright_fisher_drift([0.5, 0.3])
        x = np.array([[0.0], [1.0], [0.25]])
        expect = 0.5 * (1.0 - x) - 0.3 * x
        assert np.allclose(drift(x), expect)

    def test_positive_weights_required(self):
        with pytest.raises(DomainError):
            wright_fisher_drift([1.0, 0.0])


class TestProjection:
    def test_inside_points_untouched(self):
        y = np.array([[0.2, 0.3], [0.0, 0.0]])
        assert np.allclose(project_to_simplex(y), y)

    def test_negative_coordinates_clipped(self):
        y = np.array([[-0.1, 0.4]])
        assert np.allclose(project_to_simplex(y), [[0.0, 0.4]])

    def test_sum_constraint_projection(self):
        y = np.array([[0.9, 0.9]])
        x = project_to_simplex(y)
        assert x.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(x, [[0.5, 0.5]])  # symmetric point projects symmetrically

    def test_projection_is_idempotent_on_random_cloud(self):
        rng = np.random.default_rng(0)
        y = rng.normal(0.3, 0.8, size=(200, 3))
        x = project_to_simplex(y)
        assert np.allclose(project_to_simplex(x), x, atol=1e-14)
        assert (x >= 0).all()
        assert (x.sum(axis=1) <= 1.0 + 1e-12).all()

    def test_inradius(self):
        assert simplex_inradius(1) == pytest.approx(0.5)
        assert simplex_inradius(2) == pytest.approx(1.0 / (2.0 + math.sqrt(2.0)))


class TestSimulate:
    def test_deterministic_given_seed(self):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=1e-3, steps=200,
            paths=500, seed=99, initial=np.array([0.5]),
        )
        a = simulate(sde)
        b = simulate(sde)
        assert np.array_equal(a.terminal, b.terminal)
        assert a.manifest == b.manifest

    def test_states_stay_in_simplex(self):
        sde = SimplexSDE(
            n=2, drift=wright_fisher_drift([1.0, 1.0, 1.0]), dt=1e-3, steps=300,
            paths=400, seed=4, initial=np.array([0.3, 0.3]),
        )
        res = simulate(sde)
        assert (res.terminal >= 0.0).all()
        assert (res.terminal.sum(axis=1) <= 1.0 + 1e-12).all()

    def test_vertex_is_absorbing_without_drift(self):
        sde = SimplexSDE(
            n=1, drift=lambda x: np.zeros_like(x), dt=1e-3, steps=50,
            paths=16, seed=1, initial=np.array([0.0]),
        )
        res = simulate(sde)
        assert np.array_equal(res.terminal, np.zeros((16, 1)))

    def test_step_size_guard(self):
        with pytest.raises(DomainError):
            simulate(
                SimplexSDE(
                    n=1, drift=wright_fisher_drift([40.0, 40.0]), dt=0.01, steps=5,
                    paths=4, seed=1, initial=np.array([0.5]),
                )
            )

    def test_thinned_trajectories_recorded(self):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=1e-3, steps=100,
            paths=50, seed=5, initial=np.array([0.5]), record_every=25,
        )
        res = simulate(sde)
        assert res.trajectories.shape == (4, 50, 1)
        assert np.allclose(res.trajectory_times, [0.025, 0.05, 0.075, 0.1])
        assert "noise_convention" in res.manifest_json()

    def test_symmetric_setup_gives_symmetric_histogram(self):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([2.0, 2.0]), dt=5e-4, steps=4000,
            paths=20000, seed=12, initial=np.array([0.5]),
        )
        res = simulate(sde)
        edges = np.linspace(0.0, 1.0, 21)
        emp = empirical_stationary(res.terminal[:, 0], edges)
        asym = np.abs(emp.masses - emp.masses[::-1]).sum()
        assert asym < 0.05  # MC-level symmetry under x -> 1-x


class TestStationaryHistograms:
    def test_uniform_stationary_law(self):
        # oracle: Beta(1,1) is uniform
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=5e-4, steps=6000,
            paths=30000, seed=2025, initial=np.array([0.5]),
        )
        res = simulate(sde)
        edges = stationary_bins(1.0, 1.0)
        emp = empirical_stationary(res.terminal[:, 0], edges)
        assert l1_distance(emp, beta_masses(1.0, 1.0, edges)) < 0.05

    def test_arcsine_edges_have_mass(self):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([0.5, 0.5]), dt=5e-4, steps=8000,
            paths=30000, seed=77, initial=np.array([0.5]),
        )
        res = simulate(sde)
        edges = stationary_bins(0.5, 0.5)
        emp = empirical_stationary(res.terminal[:, 0], edges)
        ref = beta_masses(0.5, 0.5, edges)
        assert emp.masses[0] > 0.05  # widened edge bin catches the arcsine spike
        assert l1_distance(emp, ref) < 0.09

    def test_dirichlet_marginals_on_two_simplex(self):
        # Dirichlet(1,1,1) marginals are Beta(1,2)
        sde = SimplexSDE(
            n=2, drift=wright_fisher_drift([1.0, 1.0, 1.0]), dt=2e-3, steps=2500,
            paths=8000, seed=31, initial=np.array([1.0 / 3.0, 1.0 / 3.0]),
        )
        res = simulate(sde)
        edges = np.linspace(0.0, 1.0, 17)
        for coord in (0, 1):
            emp = empirical_stationary(res.terminal, edges, coordinate=coord)
            assert l1_distance(emp, beta_masses(1.0, 2.0, edges)) < 0.08

    def test_density_bin_masses_match_beta(self):
        from kimura.discretization import stationary_density

        density, _ = stationary_density(KimuraOperator1D.unit_interval(3.0, 3.0))
        edges = stationary_bins(3.0, 3.0)
        got = density_bin_masses(density, edges)
        assert np.abs(got - beta_masses(3.0, 3.0, edges)).sum() < 1e-10

    def test_normalization_validated(self):
        with pytest.raises(DomainError):
            EmpiricalDensity(edges=np.array([0.0, 1.0]), masses=np.array([0.5]), path_count=10)


@pytest.fixture(scope="module")
def jacobi_eig():
    return eigs(assemble(KimuraOperator1D.unit_interval(1.0, 1.0), GridSpec(300)))


class TestTransitionCheck:
    def test_moderate_time_agreement(self, jacobi_eig):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=1e-3, steps=100,
            paths=60000, seed=808, initial=np.array([0.5]),
        )
        report = transition_check(sde, 0.05, jacobi_eig, np.linspace(0.0, 1.0, 26))
        assert report.l1 < 0.08

    def test_long_time_approaches_stationary(self, jacobi_eig):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=1e-3, steps=3000,
            paths=40000, seed=809, initial=np.array([0.5]),
        )
        report = transition_check(sde, 3.0, jacobi_eig, np.linspace(0.0, 1.0, 26))
        assert report.l1 < 0.05
        emp_edges = np.linspace(0.0, 1.0, 26)
        sim = simulate(
            SimplexSDE(n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=1e-3, steps=3000,
                       paths=40000, seed=809, initial=np.array([0.5]))
        )
        emp = empirical_stationary(sim.terminal[:, 0], emp_edges)
        assert l1_distance(emp, beta_masses(1.0, 1.0, emp_edges)) < 0.05

    def test_requires_matching_horizon(self, jacobi_eig):
        sde = SimplexSDE(
            n=1, drift=wright_fisher_drift([1.0, 1.0]), dt=1e-3, steps=10,
            paths=100, seed=1, initial=np.array([0.5]),
        )
        with pytest.raises(DomainError):
            transition_check(sde, 0.05, jacobi_eig, np.linspace(0.0, 1.0, 11))
