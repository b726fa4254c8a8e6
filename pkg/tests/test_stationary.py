import math

import numpy as np
import pytest

from mckean_lab.errors import DegenerateNormalization, NoAdmissibleRoot
from mckean_lab.measures import Grid, MomentVector, default_grid, moment_distance, moments
from mckean_lab.pde import eta
from mckean_lab.potentials import InteractionPotential, validate_interaction
from mckean_lab.stationary import (
    MINUS,
    PLUS,
    SYMMETRIC,
    FixedPointConfig,
    NoConvergence,
    StationaryMeasure,
    classify,
    enumerate_stationary,
    find_x0,
    fixed_point_solve,
    gibbs_density,
    symmetric_limit_energy,
)

from conftest import interaction


@pytest.fixture(scope="module")
def report(V, F, grid01):
    return enumerate_stationary(V, F, 0.1, grid01)


class TestGibbs:
    def test_zero_interaction_is_classical(self, V):
        eps = 0.5
        g = default_grid(V, eps, 401)
        u = gibbs_density([1.0], V, InteractionPotential.zero(), eps, g)
        ref = np.exp(-2 * V(g.x) / eps)
        ref /= g.integrate(ref)
        np.testing.assert_allclose(u.values, ref, rtol=1e-12)
        assert np.array_equal(u.values, u.values[::-1])
        # bimodal: maxima at the wells, dip at 0
        k0 = len(g.x) // 2
        assert u.values[k0] < u.values[np.argmin(np.abs(g.x - 1.0))]

    def test_dirac_moments(self, V, grid01):
        a, eps = 0.7, 0.1
        F = validate_interaction([0, 0, 0.5])
        u = gibbs_density([1.0, a, a * a], V, F, eps, grid01)
        x = grid01.x
        ref = np.exp(-(2 / eps) * (V(x) + 0.5 * (x - a) ** 2))
        ref /= grid01.integrate(ref)
        np.testing.assert_allclose(u.values, ref, rtol=1e-9, atol=1e-300)

    def test_unit_mass(self, V, F, grid01, rng):
        for _ in range(5):
            m = MomentVector.gaussian(rng.uniform(-1, 1), rng.uniform(0.1, 0.5), 4)
            assert abs(gibbs_density(m, V, F, 0.1, grid01).mass - 1.0) < 1e-12

    def test_narrow_grid_degenerate(self, V, F):
        with pytest.raises(DegenerateNormalization):
            gibbs_density([1.0, 0, 0.5], V, F, 1.0, Grid.symmetric(0.5, 101))


class TestFixedPoint:
    def test_symmetric_from_centered_seed(self, V, F, grid01):
        s = fixed_point_solve(MomentVector.gaussian(0.0, 0.2, 4), V, F, 0.1, grid01)
        assert isinstance(s, StationaryMeasure)
        assert s.symmetry == SYMMETRIC
        assert s.moments.m1 == 0.0
        assert s.residual < 1e-12
        assert s.eta_norm < 1e-7

    def test_asymmetric_from_well_seed(self, V, F, grid01):
        s = fixed_point_solve(MomentVector.gaussian(1.0, 0.2, 4), V, F, 0.1, grid01)
        assert s.symmetry == PLUS
        assert 0.9 < s.moments.m1 < 1.0

    def test_reflection_equivariance(self, V, F, grid01):
        seed = MomentVector.gaussian(0.8, 0.3, 4)
        a = fixed_point_solve(seed, V, F, 0.1, grid01)
        b = fixed_point_solve(seed.reflected(), V, F, 0.1, grid01)
        assert b.symmetry == MINUS
        np.testing.assert_allclose(b.moments.values[1::2], -a.moments.values[1::2], atol=1e-12)
        np.testing.assert_allclose(b.moments.values[0::2], a.moments.values[0::2], atol=1e-12)

    def test_budget_exhausted(self, V, F, grid01):
        out = fixed_point_solve(MomentVector.gaussian(0.5, 0.3, 4), V, F, 0.1, grid01,
                                FixedPointConfig(max_iter=3))
        assert isinstance(out, NoConvergence)
        assert out.iterations == 3
        assert out.residual > 1e-12

    def test_bad_seed(self, V, F, grid01):
        with pytest.raises(ValueError):
            fixed_point_solve([1.0, 0.0], V, F, 0.1, grid01)
        with pytest.raises(ValueError):
            fixed_point_solve([1.0, math.nan, 1, 0, 1], V, F, 0.1, grid01)

    def test_extra_iteration_is_contractive(self, report, V, F, grid01):
        for s in report.measures:
            again = moments(gibbs_density(s.moments, V, F, 0.1, grid01), 4)
            assert moment_distance(again, s.moments) <= 1e-11


class TestEnumerate:
    def test_three_measures_ordered(self, report):
        assert report.count == 3
        assert report.m3_status == "M3"
        assert report.ordering_ok
        plus, minus, sym = report.branch(PLUS), report.branch(MINUS), report.branch(SYMMETRIC)
        assert abs(plus.free_energy.total - minus.free_energy.total) <= 1e-9
        assert plus.free_energy.total < sym.free_energy.total

    def test_certificates(self, report, V, F):
        for s in report.measures:
            assert np.max(np.abs(eta(s.density, V, F, 0.1))) <= 1e-7
            assert s.residual < 1e-12
            if s.symmetry == SYMMETRIC:
                assert np.all(np.abs(s.moments.values[1::2]) <= 1e-9)

    def test_closed_under_reflection(self, report):
        for s in report.measures:
            mirror = s.moments.reflected()
            assert min(moment_distance(mirror, t.moments) for t in report.measures) < 1e-9

    def test_high_temperature_unique(self, V, F):
        eps = 10.0
        rep = enumerate_stationary(V, F, eps, default_grid(V, eps, 801))
        assert rep.count == 1
        assert rep.measures[0].symmetry == SYMMETRIC
        assert rep.m3_status == "ZeroM1_only"

    def test_synchronized_case(self, V):
        F = interaction(1.5)
        rep = enumerate_stationary(V, F, 0.1, default_grid(V, 0.1, 801))
        assert rep.count == 3
        assert rep.m3_status == "M3"

    def test_energy_threshold(self, V, F, grid01, report):
        fsym = report.branch(SYMMETRIC).free_energy.total
        extra = MomentVector.gaussian(0.0, 0.2, 4)
        rep = enumerate_stationary(V, F, 0.1, grid01, extra_seeds=[extra], energy_threshold=fsym + 1.0)
        assert rep.m3_status == "M3"
        assert rep.count == 3       # the extra seed lands on a known state

    def test_parallel_matches_serial(self, V, F, grid01, report):
        rep = enumerate_stationary(V, F, 0.1, grid01, max_workers=4)
        assert [s.symmetry for s in rep.measures] == [s.symmetry for s in report.measures]
        for a, b in zip(rep.measures, report.measures):
            np.testing.assert_array_equal(a.density.values, b.density.values)


class TestX0:
    def test_linear_interaction(self, V, F):
        x0 = find_x0(V, F)
        assert x0 == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert np.roots([1, 0, -0.5, 0]).real.max() == pytest.approx(x0, abs=1e-12)

    def test_synchronized(self, V):
        assert find_x0(V, interaction(1.5)) == 0.0

    def test_no_interaction(self, V):
        assert find_x0(V, InteractionPotential.zero()) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_limit_energy(self, V, F):
        assert symmetric_limit_energy(V, F) == pytest.approx(-0.0625, abs=1e-14)
        assert symmetric_limit_energy(V, interaction(1.5)) == 0.0

    def test_no_admissible_root(self, V):
        # at alpha = 1 the effective curvature at the double root 0 vanishes
        with pytest.raises(NoAdmissibleRoot):
            find_x0(V, interaction(1.0))


def test_classify():
    assert classify(MomentVector([1, 0, 1, 0, 3])) == SYMMETRIC
    assert classify(MomentVector([1, 0.2, 1, 0, 3])) == PLUS
    assert classify(MomentVector([1, -0.2, 1, 0, 3])) == MINUS
