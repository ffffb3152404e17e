import math

import numpy as np
import pytest

from lorenztf import equilibrium as eq
from lorenztf import potentials as pot
from lorenztf.cylinders import Subset, boundary_cylinder
from lorenztf.errors import PreconditionError
from lorenztf.lorenz_map import PeriodicOrbit, affine, boundary_periodic_point, doubling, periodic_point

D = doubling()
A0 = affine(0.4, 0.0, 1.0)
LOG2 = math.log(2)


def _mu(word, m=D):
    return eq.AtomicMeasure(periodic_point(m, word))


def test_atomic_measure_basics():
    mu = _mu((0, 1))
    assert sum(mu.weights) == pytest.approx(1.0)
    assert mu.is_invariant(D)


def test_free_energy_examples():
    mu = _mu((0, 1))
    assert eq.free_energy(D, pot.constant(0), mu) == 0.0
    assert eq.free_energy(D, pot.identity(), mu) == pytest.approx(0.5)
    assert eq.free_energy(D, pot.constant(2.5), mu) == pytest.approx(2.5)


def test_free_energy_rotation_and_shift():
    o = periodic_point(D, (0, 1, 1, 0, 1))
    rotated = PeriodicOrbit(o.orbit[2], o.period, o.orbit[2:] + o.orbit[:2], o.side, o.residual)
    phi = pot.sin_like()
    a = eq.free_energy(D, phi, eq.AtomicMeasure(o))
    assert eq.free_energy(D, phi, eq.AtomicMeasure(rotated)) == pytest.approx(a, abs=1e-15)
    assert eq.free_energy(D, phi.shift(0.7), eq.AtomicMeasure(o)) == pytest.approx(a + 0.7)


def test_free_energy_flags_divergence():
    mu = eq.AtomicMeasure(boundary_periodic_point(A0, 12, "plus"))
    pf = pot.phase_family(A0, 1e-3)
    assert math.isinf(eq.free_energy(A0, pf, mu))
    assert eq.is_divergent(2e12) and not eq.is_divergent(1e11)


def test_proposition_med_examples():
    mu = _mu((0, 1))
    r = eq.proposition_med_check(D, pot.constant(0), mu, None, n_max=12)
    assert r.lhs == pytest.approx(LOG2) and r.rhs == 0.0 and r.holds
    orb = boundary_periodic_point(D, 4, "plus")
    cyl = boundary_cylinder(D, 4, "plus")
    r = eq.proposition_med_check(D, pot.identity(), eq.AtomicMeasure(orb),
                                 Subset.interval(cyl.lo, cyl.hi), n_max=14)
    assert r.holds and r.lhs >= r.rhs


def test_proposition_med_needs_mass_in_subset():
    with pytest.raises(PreconditionError):
        eq.proposition_med_check(D, pot.identity(), _mu((0, 1)), Subset.interval(0.8, 0.9))


@pytest.mark.parametrize("word", [(0, 1), (0, 0, 1), (0, 1, 1, 1), (1, 0, 0, 1, 0)])
def test_proposition_med_on_corpus(word):
    mu = _mu(word, A0)
    for phi in (pot.identity(), pot.sin_like(), pot.constant(-1.0)):
        assert eq.proposition_med_check(A0, phi, mu, None, n_max=12).holds


def test_battery_zero_potential():
    rep = eq.theorem_a_battery(D, pot.constant(0), k_max=5, n_max=14)
    assert rep.passed
    assert rep.margin == pytest.approx(LOG2, abs=1e-9)


def test_battery_identity_orbit_averages():
    rep = eq.theorem_a_battery(D, pot.identity(), k_max=6, n_max=14)
    plus = [r for r in rep.rows if r.side == "plus"]
    assert all(r.boundary_limsup == 0.0 for r in plus)
    assert [r.orbit_average for r in plus][1:] == sorted([r.orbit_average for r in plus][1:], reverse=True)
    assert max(r.shift_error for r in rep.rows) <= 1e-12
    assert rep.b and rep.d


def test_battery_refuses_discontinuous_potential():
    with pytest.raises(PreconditionError):
        eq.theorem_a_battery(D, pot.step(0.3), k_max=2, n_max=8)


def test_battery_csv():
    rep = eq.theorem_a_battery(D, pot.constant(0), k_max=2, n_max=8)
    text = eq.battery_csv(rep, "hdr")
    assert text.splitlines()[1].startswith("k,side,period")
    assert "verdict=gap" in text.splitlines()[-1]


def test_regime_rule():
    assert eq.regime_of("divergent", [math.inf], 3.0, "gap") == "multiple-equilibria"
    assert eq.regime_of("divergent", [4.0], 3.0, "gap") == "multiple-equilibria"
    assert eq.regime_of("divergent", [2.0], 3.0, "gap") == "no-equilibrium-candidate"
    assert eq.regime_of("summable", [2.0], 3.0, "gap") == "unique-candidate"
    assert eq.regime_of("summable", [2.0], 3.0, "no-gap") == "no-equilibrium-candidate"


def test_phase_scan_extremes_and_bad_t():
    scan = eq.phase_scan(A0, [0.0, 1e-3, 10.0], n_max=12, k_max=6)
    rows = {r.t: r for r in scan.rows}
    assert rows[0.0].error is not None
    assert rows[1e-3].regime == "multiple-equilibria"
    assert rows[10.0].regime == "unique-candidate"
    assert rows[10.0].variation_verdict == "summable"
    text = eq.scan_csv(scan, "hdr")
    assert text.splitlines()[1].startswith("t,verdict,fe_plus1")
    assert "critical_bracket=" in text.splitlines()[-1]


def test_phase_scan_single_row():
    scan = eq.phase_scan(A0, [2.0], n_max=10, k_max=3)
    assert len(scan.rows) == 1 and scan.flips == 0 and scan.bracket is None


def test_formula_range_is_ordered():
    lo, hi = eq.formula_range(A0, 16)
    assert 0 < lo < hi < 0.4
