import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mckean_lab.asymptotics import extract_minima, free_energy_sweep, laplace_ratio, laplace_report
from mckean_lab.errors import BranchLost, GrowthPreconditionFails
from mckean_lab.potentials import Polynomial
from mckean_lab.stationary import MINUS, PLUS, SYMMETRIC

from conftest import QUARTIC, interaction

DOUBLE_WELL = Polynomial(QUARTIC)


class TestLaplace:
    def test_gaussian_closed_form(self):
        # exp(-2 (x-2)^2 / eps) is a Gaussian with variance eps/4
        U = Polynomial((4.0, -4.0, 1.0))
        for eps in (0.01, 0.1, 1.0):
            assert laplace_ratio(U, eps, 1) == pytest.approx(2.0, rel=1e-12)
            assert laplace_ratio(U, eps, 2) == pytest.approx(4.0 + eps / 4, rel=1e-12)

    def test_even_potential_odd_ratio_exactly_zero(self):
        for eps in (0.02, 0.3, 2.0):
            assert laplace_ratio(DOUBLE_WELL, eps, 1) == 0.0
            assert laplace_ratio(DOUBLE_WELL, eps, 3) == 0.0

    def test_double_well_second_moment_tends_to_one(self):
        errs = [abs(laplace_ratio(DOUBLE_WELL, eps, 2) - 1.0) for eps in (0.1, 0.05, 0.025)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.05

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-5.0, 5.0), st.floats(0.05, 1.0))
    def test_shift_invariant(self, c, eps):
        U = Polynomial((0.0, 0.3, -1.0, 0.0, 0.5))
        a = laplace_ratio(U, eps, 2)
        b = laplace_ratio(U + Polynomial((c,)), eps, 2)
        assert b == pytest.approx(a, rel=1e-10)

    def test_precondition(self):
        with pytest.raises(GrowthPreconditionFails):
            laplace_ratio(Polynomial((0.0, 1.0, 0.0, 1.0)), 0.1, 1)
        with pytest.raises(GrowthPreconditionFails):
            laplace_ratio(Polynomial((0.0, 0.0, -1.0)), 0.1, 1)
        with pytest.raises(ValueError):
            laplace_ratio(DOUBLE_WELL, 0.0, 1)


class TestMinima:
    def test_double_well(self):
        np.testing.assert_allclose(extract_minima(DOUBLE_WELL), [-1.0, 1.0], atol=1e-12)

    def test_tilted_well_has_one_minimum(self):
        A = extract_minima(DOUBLE_WELL + Polynomial((0.0, -0.1)))
        assert len(A) == 1 and A[0] > 1.0

    def test_symmetric_weights(self):
        rep = laplace_report(DOUBLE_WELL, 0.1)
        np.testing.assert_allclose(rep.weights, [0.5, 0.5], atol=1e-10)
        assert rep.predicted(2) == pytest.approx(1.0)
        assert rep.predicted(1) == pytest.approx(0.0, abs=1e-10)

    def test_tilt_concentrates_ratio(self):
        U = DOUBLE_WELL + Polynomial((0.0, -0.05))
        a = extract_minima(U)[0]
        assert laplace_ratio(U, 0.01, 1) == pytest.approx(a, abs=0.01)


@pytest.fixture(scope="module")
def sweep(V, F):
    return free_energy_sweep(V, F, [0.4, 0.2, 0.1], n=401)


class TestSweep:
    def test_predicted_limits(self, sweep):
        assert sweep.predicted_limits[0] == pytest.approx(-0.25)
        assert sweep.predicted_limits[1] == pytest.approx(-0.0625)

    def test_branches_tracked_and_ordered(self, sweep):
        assert not sweep.lost
        assert sweep.ordering_holds()
        fp, fm = np.array(sweep.free_energies[PLUS]), np.array(sweep.free_energies[MINUS])
        np.testing.assert_allclose(fp, fm, atol=1e-9)
        assert all(m.m1 > 0 for m in sweep.moments[PLUS])

    def test_symmetric_branch_approaches_limit(self, sweep):
        assert sweep.monotone_approach(SYMMETRIC)

    def test_csv(self, sweep, tmp_path):
        path = tmp_path / "sweep.csv"
        sweep.write_csv(path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["eps", "fe_sym", "fe_plus", "fe_minus", "predicted_sym_limit", "predicted_asym_limit"]
        assert len(rows) == 4
        assert float(rows[1][0]) == 0.4

    def test_decreasing_eps_required(self, V, F):
        with pytest.raises(ValueError):
            free_energy_sweep(V, F, [0.1, 0.2])

    def test_synchronized_limit_is_zero(self, V):
        rep = free_energy_sweep(V, interaction(1.5), [0.2], n=401)
        assert rep.predicted_limits == (pytest.approx(-0.25), 0.0)

    def test_lost_branch(self, V, F):
        # at high temperature only the symmetric state exists
        rep = free_energy_sweep(V, F, [10.0], n=401)
        assert set(rep.lost) == {PLUS, MINUS}
        assert math.isnan(rep.free_energies[PLUS][0])
        with pytest.raises(BranchLost):
            free_energy_sweep(V, F, [10.0], n=401, strict=True)
