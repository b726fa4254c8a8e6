import csv

import numpy as np
import pytest

from mckean_lab.errors import NonmonotoneEnergy, PositivityLoss, StabilityViolation
from mckean_lab.measures import (
    Grid,
    GridDensity,
    MomentVector,
    default_grid,
    free_energy,
    is_symmetric,
    moments,
    symmetrize,
)
from mckean_lab.pde import (
    SolverConfig,
    _finish,
    cfl_dt,
    dissipation_check,
    drift_potential,
    eta,
    evolve,
    moment_ceiling_ok,
    stationary_residual,
    step,
)
from mckean_lab.potentials import InteractionPotential
from mckean_lab.stationary import fixed_point_solve


@pytest.fixture(scope="module")
def grid03(V):
    return default_grid(V, 0.3, 401)


@pytest.fixture(scope="module")
def plus_state(V, F, grid01):
    return fixed_point_solve(MomentVector.gaussian(1.0, 0.2, 4), V, F, 0.1, grid01)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SolverConfig(0.0, 0.1, 1.0)
        with pytest.raises(ValueError):
            SolverConfig(0.1, -1.0, 1.0)
        with pytest.raises(ValueError):
            SolverConfig(0.1, 0.1, 1.0, scheme="leapfrog")

    def test_n_steps(self):
        assert SolverConfig(0.1, 0.01, 1.0).n_steps == 100


class TestEta:
    def test_vanishes_on_self_consistent_state(self, plus_state, V, F):
        u = plus_state.density
        assert np.max(np.abs(eta(u, V, F, 0.1))) <= 1e-6 * np.max(u.values)

    def test_vanishes_on_linear_gibbs_state(self, V):
        eps = 0.5
        g = default_grid(V, eps, 401)
        u = GridDensity.from_function(g, lambda x: np.exp(-2 * V(x) / eps))
        assert np.max(np.abs(eta(u, V, InteractionPotential.zero(), eps))) < 1e-12

    def test_pushes_bump_toward_well(self, V, F):
        g = Grid.symmetric(2.5, 501)
        for c in (0.5, -0.5):
            u = GridDensity.gaussian(g, c, 0.05)
            e = eta(u, V, F, 0.1)
            k = np.argmin(np.abs(g.x - c))
            # mass moves with velocity -eta/u; V'(0.5) = -0.375 so the pull is outward
            assert -np.sign(e[k]) == np.sign(c)

    def test_matches_plain_difference(self, V, F):
        # away from equilibrium the fitted form agrees with the textbook flux
        g = Grid.symmetric(2.5, 2001)
        u = GridDensity.gaussian(g, 0.3, 0.4)
        eps = 0.3
        b = drift_potential(u, V, F).deriv()(g.x)
        plain = 0.5 * eps * np.gradient(u.values, g.dx) + u.values * b
        np.testing.assert_allclose(eta(u, V, F, eps)[1:-1], plain[1:-1], atol=1e-4)


class TestStep:
    def test_stationary_is_fixed_point(self, plus_state, V, F):
        u = plus_state.density
        out = step(u, SolverConfig(0.1, 0.05, 1.0), V, F)
        assert out.sup_distance(u) < 1e-10

    def test_symmetric_input_stays_symmetric(self, V, F, grid03):
        u = GridDensity.mixture(grid03, [(0.5, 0.6, 0.2), (0.5, -0.6, 0.2)])
        assert np.array_equal(u.values, u.values[::-1])
        out = step(u, SolverConfig(0.3, 0.01, 1.0), V, F)
        assert is_symmetric(out, 1e-12)

    def test_one_step_lowers_free_energy(self, V, F, grid03):
        u = GridDensity.gaussian(grid03, 0.5, 0.3)
        out = step(u, SolverConfig(0.3, 1e-3, 1.0), V, F)
        before = free_energy(u, V, F, 0.3).total
        after = free_energy(out, V, F, 0.3).total
        assert after < before
        assert abs(out.mass - u.mass) < 1e-13

    def test_explicit_scheme_bound(self, V, F, grid03):
        u = GridDensity.gaussian(grid03, 0.5, 0.3)
        dt = cfl_dt(u, V, F, 0.3)
        out = step(u, SolverConfig(0.3, dt, 1.0, scheme="explicit_upwind"), V, F)
        assert abs(out.mass - 1.0) < 1e-13
        assert free_energy(out, V, F, 0.3).total < free_energy(u, V, F, 0.3).total
        with pytest.raises(StabilityViolation):
            step(u, SolverConfig(0.3, 10 * dt, 1.0, scheme="explicit_upwind"), V, F)

    def test_cfl_formula(self, V, F, grid03):
        u = GridDensity.gaussian(grid03, 0.5, 0.3)
        b = drift_potential(u, V, F).deriv()(grid03.x)
        dx = grid03.dx
        expect = 0.4 * min(dx * dx / 0.3, dx / np.max(np.abs(b)))
        assert cfl_dt(u, V, F, 0.3) == pytest.approx(expect)

    def test_undershoot_policy(self, grid03):
        u = GridDensity.gaussian(grid03, 0.0, 0.3)
        v = u.values.copy()
        v[0] = -1e-14
        assert np.min(_finish(u, v, False).values) == 0.0
        v[0] = -1e-6
        with pytest.raises(PositivityLoss):
            _finish(u, v, False)


class TestEvolve:
    def test_mass_and_monotonicity(self, V, F, grid03):
        u0 = GridDensity.mixture(grid03, [(0.7, -0.8, 0.15), (0.3, 1.2, 0.3)])
        rec = evolve(u0, SolverConfig(0.3, 0.01, 3.0, record_every=5, detect_convergence=False), V, F)
        assert np.max(np.abs(np.array(rec.mass) - 1.0)) < 1e-10
        assert np.max(rec.decrements) <= 1e-12
        assert rec.status == "completed"
        assert rec.steps == 300

    def test_symmetry_preserved_over_run(self, V, F, grid03):
        u0 = symmetrize(GridDensity.mixture(grid03, [(0.5, 0.9, 0.1), (0.5, 0.2, 0.3)]))
        seen = []
        evolve(u0, SolverConfig(0.3, 0.02, 4.0, detect_convergence=False), V, F,
               callback=lambda k, u: seen.append(np.max(np.abs(u.values - u.values[::-1]))))
        assert max(seen) <= 1e-11

    def test_stationary_input_constant(self, plus_state, V, F):
        rec = evolve(plus_state.density, SolverConfig(0.1, 0.05, 5.0, record_every=10,
                                                      detect_convergence=False), V, F)
        fe = np.array(rec.free_energy)
        assert np.ptp(fe) < 1e-12
        assert max(rec.dissipation) < 1e-20
        rep = dissipation_check(rec)
        assert rep.gap < 1e-10

    def test_converges_and_stops_early(self, V, F, grid01):
        u0 = GridDensity.gaussian(grid01, 0.8, 0.2)
        rec = evolve(u0, SolverConfig(0.1, 0.01, 500.0, record_every=20), V, F)
        assert rec.status == "converged"
        assert rec.eta_max[-1] < 1e-7
        assert moments(rec.final_density, 1).m1 > 0.9
        assert stationary_residual(rec.final_density, V, F, 0.1) < 1e-7

    def test_nonmonotone_detector(self, V, F, grid03):
        u0 = GridDensity.gaussian(grid03, 0.5, 0.3)
        # a negative tolerance turns every genuine decrease smaller than 1 into a reported rise
        with pytest.raises(NonmonotoneEnergy):
            evolve(u0, SolverConfig(0.3, 0.01, 0.1, monotone_tol=-1.0), V, F)

    def test_far_from_equilibrium_slope_negative(self, V, F, grid03):
        u0 = GridDensity.gaussian(grid03, -1.5, 0.1)
        rec = evolve(u0, SolverConfig(0.3, 1e-3, 0.05, detect_convergence=False), V, F)
        rep = dissipation_check(rec)
        assert rep.early_slope < 0
        assert np.all(rep.slopes < 0)

    def test_moment_ceiling(self, V, F, grid03):
        u0 = GridDensity.gaussian(grid03, 0.5, 0.3)
        rec = evolve(u0, SolverConfig(0.3, 0.01, 1.0, record_every=10, detect_convergence=False), V, F)
        assert moment_ceiling_ok(rec, 10.0)
        assert not moment_ceiling_ok(rec, 0.01)

    def test_trajectory_csv(self, V, F, grid03, tmp_path):
        u0 = GridDensity.gaussian(grid03, 0.5, 0.3)
        rec = evolve(u0, SolverConfig(0.3, 0.01, 0.1, detect_convergence=False), V, F)
        path = tmp_path / "traj.csv"
        rec.write_csv(path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "free_energy", "dissipation", "m1", "m2", "m3", "m4"]
        assert len(rows) == 12
        assert all(len(r) == 7 for r in rows)


class TestConvergenceOrder:
    def _final(self, V, F, n, dt, t_end=0.5, eps=0.3):
        g = Grid.symmetric(2.8, n)
        u0 = GridDensity.mixture(g, [(0.6, 0.4, 0.3), (0.4, -0.6, 0.35)])
        rec = evolve(u0, SolverConfig(eps, dt, t_end, record_every=10**9, detect_convergence=False), V, F)
        return rec.final_density.values

    def test_first_order_in_time(self, V, F):
        u = [self._final(V, F, 401, dt) for dt in (0.02, 0.01, 0.005)]
        d1 = np.max(np.abs(u[0] - u[1]))
        d2 = np.max(np.abs(u[1] - u[2]))
        assert d1 / d2 > 1.9

    def test_second_order_in_space(self, V, F):
        u = [self._final(V, F, n, 2e-4, t_end=0.1) for n in (101, 201, 401)]
        d1 = np.max(np.abs(u[0] - u[1][::2]))
        d2 = np.max(np.abs(u[1] - u[2][::2]))
        assert d1 / d2 > 3.5
