import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from lorenztf import cylinders as cyl
from lorenztf.errors import DepthCapError
from lorenztf.lorenz_map import affine, doubling

from oracles import AffineQ, dyadic_touching_count, forward_cylinders

D = doubling()
A = affine(0.4, 0.1, 0.9)
MAPS = [D, A, affine(0.35, 0.05, 0.95)]


def test_doubling_depth_three_is_dyadic():
    cs = cyl.enumerate_cylinders(D, 3)
    assert [(c.lo, c.hi) for c in cs] == [(k / 8, (k + 1) / 8) for k in range(8)]
    assert [c.word_str for c in cs] == ["LLL", "LLR", "LRL", "LRR", "RLL", "RLR", "RRL", "RRR"]


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_affine_matches_forward_intersection_oracle(n):
    ref = forward_cylinders(AffineQ(Fraction(2, 5), Fraction(1, 10), Fraction(9, 10)), n)
    got = cyl.enumerate_cylinders(A, n)
    assert [c.word for c in got] == [w for w, _, _ in ref]
    for c, (_, lo, hi) in zip(got, ref):
        assert c.lo == pytest.approx(float(lo), abs=1e-13)
        assert c.hi == pytest.approx(float(hi), abs=1e-13)


def test_affine_depth_two_is_full():
    # every two-letter word is admissible here: frozen from the oracle
    assert [c.word_str for c in cyl.enumerate_cylinders(A, 2)] == ["LL", "LR", "RL", "RR"]


def test_depth_one_is_base_partition():
    for m in MAPS:
        cs = cyl.enumerate_cylinders(m, 1)
        assert [(c.lo, c.hi) for c in cs] == [(0.0, m.d), (m.d, 1.0)]


def test_depth_cap():
    with pytest.raises(DepthCapError, match="2\\^27"):
        cyl.enumerate_cylinders(D, 27)
    with pytest.raises(ValueError):
        cyl.enumerate_cylinders(D, 0)


def test_touching_boundary_doubling_depth5_brute_force():
    got = cyl.touching(D, 5, "boundary")
    assert len(got) == dyadic_touching_count(5, [0, Fraction(1, 2), 1]) == 4
    assert [(c.lo, c.hi) for c in got] == [(0, 1 / 32), (15 / 32, 0.5), (0.5, 17 / 32), (31 / 32, 1)]


@pytest.mark.parametrize("n", [3, 6, 10])
def test_touching_counts_match_dyadic_oracle(n):
    pts = [Fraction(1, 3), Fraction(1, 4), Fraction(5, 8)]
    got = cyl.touching(D, n, cyl.Subset.of_points([float(p) for p in pts]))
    assert len(got) == dyadic_touching_count(n, pts)


def test_touching_special_sets():
    for m in MAPS:
        assert len(cyl.touching(m, 1, [m.d])) == 2
    assert cyl.touching(D, 4, cyl.Subset.of_points([])) == []
    assert len(cyl.touching(D, 4, (0.2, 0.3))) == 2  # [3/16,1/4] and [1/4,5/16]


def test_boundary_cylinder_doubling():
    c = cyl.boundary_cylinder(D, 3, "minus")
    assert c.word_str == "LRR" and (c.lo, c.hi) == pytest.approx((3 / 8, 1 / 2))
    c = cyl.boundary_cylinder(D, 3, "plus")
    assert c.word_str == "RLL" and (c.lo, c.hi) == pytest.approx((1 / 2, 5 / 8))
    with pytest.raises(DepthCapError):
        cyl.boundary_cylinder(D.with_options(depth_cap=8), 9, "plus")


def test_boundary_cylinder_has_d_on_boundary():
    for side in ("plus", "minus"):
        for k in range(1, 5):
            c = cyl.boundary_cylinder(A, k, side)
            assert (c.lo if side == "plus" else c.hi) == pytest.approx(A.d, abs=1e-12)


@pytest.mark.parametrize("m", MAPS, ids=["doubling", "affine1", "affine2"])
def test_measure_accounting(m):
    for n in (1, 8, 16, 20):
        assert cyl.measure_defect(m, n) <= n * 2 ** n * np.finfo(float).eps


def test_refinement_and_image_consistency():
    coarse = cyl.level(A, 6)
    fine = cyl.level(A, 7)
    parent = fine.codes >> 1
    for code, lo, hi in zip(parent, fine.lo, fine.hi):
        i = np.flatnonzero(coarse.codes == code)[0]
        assert coarse.lo[i] - 1e-13 <= lo and hi <= coarse.hi[i] + 1e-13
    # l(C_{w0..w6}) = C_{w1..w6}
    tail = {int(c): (lo, hi) for c, lo, hi in zip(coarse.codes, coarse.lo, coarse.hi)}
    for c in cyl.level(A, 7).cylinders():
        lo, hi = tail[int(sum(b << (5 - j) for j, b in enumerate(c.word[1:])))]
        a = A.branch(c.lo, c.word[0])
        b = A.branch(c.hi, c.word[0])
        assert lo - 1e-12 <= a and b <= hi + 1e-12


def test_itinerary_of_midpoints():
    for c in cyl.enumerate_cylinders(A, 9):
        x = 0.5 * (c.lo + c.hi)
        for sym in c.word:
            assert A.symbol_of(x) == sym
            x = A.evaluate(x)


def test_streaming_matches_full_level_for_any_thread_count():
    phi = lambda x: np.sin(3 * x)  # noqa: E731
    full = cyl.level(A, 13, phi, 3)
    for threads in (1, 4):
        blk = cyl.concat(cyl.stream_level(A, 13, phi, 3, threads=threads, block_depth=6))
        assert np.array_equal(blk.codes, full.codes)
        assert np.array_equal(blk.lo, full.lo)
        assert np.array_equal(blk.sums, full.sums)


def test_carried_birkhoff_sums_match_forward_orbits():
    phi = lambda x: np.cos(5 * x)  # noqa: E731
    lvl = cyl.level(A, 10, phi, 3)
    rng = np.random.default_rng(1)
    for i in rng.choice(len(lvl), 40, replace=False):
        x = lvl.samples[i, 1]
        ref = 0.0
        for _ in range(10):
            ref += math.cos(5 * x)
            x = A.evaluate(x) if x != A.d else 0.0
        assert lvl.sums[i, 1] == pytest.approx(ref, abs=1e-9)


def test_count_bound_and_full_branch_equality():
    assert len(cyl.level(D, 12)) == 2 ** 12
    assert len(cyl.level(A, 12)) < 2 ** 12


def test_boundary_family_grows_at_most_linearly():
    counts = [len(cyl.touching(A, n, "boundary")) for n in range(2, 15)]
    assert max(counts) <= 6


def test_csv_export():
    text = cyl.to_csv(cyl.enumerate_cylinders(D, 2), "hdr")
    lines = text.splitlines()
    assert lines[0] == "# hdr"
    assert lines[1] == "depth,word,lo,hi"
    assert lines[2] == "2,LL,0.0,0.25"
    assert len(lines) == 6


@settings(max_examples=60, deadline=None)
@given(st.floats(0.26, 0.45), st.floats(0.0, 0.2), st.floats(0.8, 1.0), st.integers(1, 12))
def test_random_affine_maps_tile(d, y0, y1, n):
    assume(y1 / (1 - d) > 1.42 and (1 - y0) / d > 1.42)
    m = affine(d, y0, y1)
    lvl = cyl.level(m, n)
    assert np.all(lvl.hi > lvl.lo)
    assert np.all(lvl.lo[1:] >= lvl.hi[:-1] - 1e-15)
    assert cyl.measure_defect(m, n) <= n * 2 ** n * np.finfo(float).eps + 1e-15
