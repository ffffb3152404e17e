import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenztf import potentials as pot
from lorenztf import pressure as pr
from lorenztf.cylinders import Subset
from lorenztf.errors import PreconditionError
from lorenztf.lorenz_map import affine, boundary_periodic_point, doubling

from oracles import birkhoff_direct, dyadic_touching_count

D = doubling()
A = affine(0.4, 0.1, 0.9)
LOG2 = math.log(2)


def test_birkhoff_examples():
    x = pot.identity()
    assert pr.birkhoff_sum(D, x, 1 / 3, 2) == pytest.approx(1.0)
    assert pr.birkhoff_sum(D, x, 0.5, 3, "plus") == 0.5
    assert pr.birkhoff_sum(A, pot.constant(0.7), 0.123, 9) == pytest.approx(6.3)


def test_birkhoff_matches_exact_rational_orbit():
    x0 = Fraction(3, 11)
    ref = birkhoff_direct(lambda q: q * q, x0, 12)
    sq = pot.Potential(lambda x: np.asarray(x) ** 2, 1.0, 0.0)
    assert pr.birkhoff_sum(D, sq, float(x0), 12) == pytest.approx(float(ref), rel=1e-9)


@pytest.mark.parametrize("n", [1, 5, 12])
def test_log_z_zero_potential_full(n):
    assert pr.partition_function(D, pot.constant(0), n) == pytest.approx(n * LOG2, abs=1e-12)


def test_log_z_boundary_depth5_brute_force():
    count = dyadic_touching_count(5, [0, Fraction(1, 2), 1])
    assert count == 4
    assert pr.partition_function(D, pot.constant(0), 5, "boundary") == pytest.approx(math.log(count))


@pytest.mark.parametrize("n", [3, 10])
def test_log_z_geometric_potential_vanishes(n):
    assert pr.partition_function(D, pot.scaled_log_slope(1.0), n) == pytest.approx(0.0, abs=1e-12)


def test_pressure_zero_potential():
    est = pr.pressure(D, pot.constant(0), None, 1, 12)
    assert all(a == pytest.approx(LOG2, abs=1e-12) for _, a in est.sequence)
    assert est.value == pytest.approx(LOG2, abs=1e-12)
    assert est.cylinder_counts == [2 ** n for n in range(1, 13)]
    assert est.sup_used == pr.SUP_SAMPLES


def test_pressure_boundary_sequence_and_limit():
    est = pr.pressure(D, pot.constant(0), "boundary", 1, 16)
    assert [a for n, a in est.sequence if n >= 3] == pytest.approx(
        [math.log(4) / n for n in range(3, 17)], abs=1e-12)
    assert est.value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("t", [0.0, 1.0, 2.0])
def test_pressure_affine_in_t(t):
    est = pr.pressure(D, pot.scaled_log_slope(t), None, 1, 10)
    assert est.value == pytest.approx((1 - t) * LOG2, abs=1e-9)


@pytest.mark.parametrize("method", pr.METHODS)
def test_extrapolation_methods_agree_on_exact_sequence(method):
    est = pr.pressure(D, pot.constant(0), None, 1, 8, method=method)
    assert est.value == pytest.approx(LOG2, abs=1e-12)


def test_bad_method_and_short_range():
    with pytest.raises(ValueError):
        pr.pressure(D, pot.constant(0), None, 1, 8, method="magic")
    with pytest.raises(ValueError):
        pr.pressure(D, pot.constant(0), None, 5, 7)


def test_lse_merge_is_overflow_free():
    big = pr.LSE.of(np.array([1e6, 1e6 - 1]))
    small = pr.LSE.of(np.array([-1e6]))
    both = big.merge(small)
    assert both.log == pytest.approx(1e6 + math.log(1 + math.exp(-1)))
    assert pr.LSE().merge(big) == big


def test_divergent_sequence_is_flagged():
    huge = pot.constant(2e12)
    est = pr.pressure(D, huge, None, 1, 5)
    assert est.diverged and math.isinf(est.value)
    assert est.growth == pytest.approx(2e12 + LOG2)


def test_boundary_averages_doubling_identity():
    b = pr.boundary_averages(D, pot.identity(), 12)
    assert b.limsup0 == 0.0
    assert b.limsup1 == 1.0
    assert b.M == 1.0 and b.preperiod_hit is None


def test_boundary_averages_preperiodic_zero():
    # choose y0 so that 0 -> y0 -> d: y0 + y0 (1 - y0) / d = d
    d = 0.35
    y0 = ((1 + d) - math.sqrt((1 + d) ** 2 - 4 * d * d)) / 2
    m = affine(d, y0, 1.0)
    assert m.evaluate(m.evaluate(0.0)) == pytest.approx(d, abs=1e-14)
    b = pr.boundary_averages(m, pot.identity(), 10)
    assert b.preperiod_hit == 2
    assert b.limsup0 == pytest.approx(y0 / 2)
    assert b.M == 1.0  # 1 is fixed and phi(1) = 1


def test_gap_check_examples():
    g = pr.gap_check(D, pot.constant(0), 14)
    assert g.verdict == "gap" and g.margin == pytest.approx(LOG2, abs=1e-9)
    g = pr.gap_check(D, pot.identity(), 14)
    assert g.verdict == "gap" and g.margin > 0.2


def test_gap_shrinks_under_tall_boundary_bump():
    # height 5 at the fixed point 0: boundary orbits dominate
    orb = boundary_periodic_point(D, 1, "minus")
    b = pot.build_bump(D, orb, heights=[5.0])
    g = pr.gap_check(D, b, 16)
    plain = pr.gap_check(D, pot.constant(0), 16)
    assert g.margin < 0.1 * plain.margin
    assert g.total.value >= 5.0 - 1e-6


def test_gap_verdict_rule():
    assert pr.gap_verdict(1.0, 0.1) == "gap"
    assert pr.gap_verdict(1e-4, 1e-4) == "no-gap"
    assert pr.gap_verdict(0.1, 0.05) == "inconclusive"
    assert pr.gap_verdict(math.nan, 0.1) == "inconclusive"


@pytest.mark.parametrize("phi,M", [(pot.constant(0.3), 0.3), (pot.identity(), 1.0)])
def test_prop_partial(phi, M):
    r = pr.prop_partial_check(D, phi, 16)
    assert r.M == pytest.approx(M)
    assert r.C_bound < 0.1
    assert r.holds


def test_transfer_oracle_examples():
    assert pr.transfer_pressure_oracle(D, pot.constant(0), 256) == pytest.approx(LOG2, abs=1e-6)
    assert pr.transfer_pressure_oracle(D, pot.scaled_log_slope(1), 256) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(PreconditionError):
        pr.transfer_pressure_oracle(D, pot.constant(0), 32)


def test_transfer_oracle_matches_pressure_for_identity():
    est = pr.pressure(D, pot.identity(), None, 1, 18).value
    assert pr.transfer_pressure_oracle(D, pot.identity(), 4096) == pytest.approx(est, abs=1e-2)


def test_transfer_oracle_affine_zero_potential():
    # topological entropy of A agrees with the cylinder-count growth
    est = pr.pressure(A, pot.constant(0), None, 1, 18).value
    assert pr.transfer_pressure_oracle(A, pot.constant(0), 2048) == pytest.approx(est, abs=1e-2)


def test_boundedness():
    phi = pot.sin_like()
    est = pr.pressure(A, phi, None, 1, 12)
    bound = LOG2 + max(abs(phi.sup_bound), abs(phi.inf_bound))
    assert all(abs(a) <= bound + 1e-12 for _, a in est.sequence)


def test_threads_do_not_change_results():
    a = pr.pressure(A, pot.sin_like(), None, 1, 18, threads=1)
    b = pr.pressure(A, pot.sin_like(), None, 1, 18, threads=6)
    assert a.log_z == b.log_z


def _random_potential(rng):
    c = rng.uniform(-1, 1, 4)
    return pot.Potential(lambda x, c=c: c[0] + c[1] * x + c[2] * np.sin(5 * x + c[3]),
                         abs(c[0]) + abs(c[1]) + abs(c[2]), -(abs(c[0]) + abs(c[1]) + abs(c[2])))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3))
def test_constant_shift_identity(seed, c):
    rng = np.random.default_rng(seed)
    phi = _random_potential(rng)
    n = int(rng.integers(1, 11))
    base = pr.partition_function(A, phi, n)
    assert pr.partition_function(A, phi.shift(c), n) == pytest.approx(base + n * c, abs=1e-12 * max(1, n * abs(c) + abs(base)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_monotone_in_subset_and_potential(seed):
    rng = np.random.default_rng(seed)
    phi = _random_potential(rng)
    bump = rng.uniform(0, 1)
    psi = phi + pot.holder(1.0, bump, float(rng.uniform()))  # psi >= phi
    a, b = sorted(rng.uniform(0, 1, 2))
    n = int(rng.integers(2, 11))
    small, big = Subset.interval(a, b), Subset.interval(max(0, a - 0.1), min(1, b + 0.1))
    assert pr.partition_function(A, phi, n, small) <= pr.partition_function(A, phi, n, big) + 1e-12
    assert pr.partition_function(A, phi, n, small) <= pr.partition_function(A, psi, n, small) + 1e-12


def test_pressure_csv():
    est = pr.pressure(D, pot.constant(0), None, 1, 4)
    lines = est.to_csv("hdr").splitlines()
    assert lines[:2] == ["# hdr", "n,cylinders_touching,log_Zn,avg"]
    assert lines[2].startswith("1,2,")
