import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martensim.core import InvalidParameter
from martensim.geometry import (Rect, cut_at_fraction, dyadic_diamond_packing, make_bucket_params,
                                poly_area, quadrant_of, rect_class, rect_class_array,
                                rect_subdivide_quadrants, tail_threshold)

UNIT = Rect(0.0, 0.0, 1.0, 1.0)


def test_packing_generation_zero():
    pk = dyadic_diamond_packing(UNIT, 0)
    assert pk.counts == [1]
    assert pk.covered_fraction == 0.5


@pytest.mark.parametrize("n", range(0, 7))
def test_packing_counts_and_coverage(n):
    pk = dyadic_diamond_packing(UNIT, n)
    assert pk.counts == [1] + [8 * 2 ** (k - 1) for k in range(1, n + 1)]
    # every diagonal is dyadic, so the area sum is exact in binary floating point
    exact = sum(Fraction(d.d1) * Fraction(d.d2) / 2 for d in pk.diamonds)
    assert exact == 1 - Fraction(1, 2 ** (n + 1))
    for d in pk.diamonds:
        k = d.scale_index
        assert d.d1 == d.d2 == (1.0 if k == 0 else 2.0 ** (-k - 1))


def test_packing_max_n_two_has_25_diamonds():
    assert len(dyadic_diamond_packing(UNIT, 2).diamonds) == 25


@pytest.mark.parametrize("r", [Rect(0.0, 0.0, 3.0, 0.25), Rect(-1.0, 2.0, 0.5, 8.0)])
def test_packing_leftover_tiles_rectangle(r):
    pk = dyadic_diamond_packing(r, 4, with_leftover=True)
    dia = sum(d.area for d in pk.diamonds)
    left = sum(poly_area(t) for t in pk.leftover)
    assert dia + left == pytest.approx(r.area, rel=1e-14)
    assert all(poly_area(t) > 0 for t in pk.leftover)
    assert left / r.area == pytest.approx(2.0 ** -5, rel=1e-14)


def test_packing_diamonds_are_disjoint():
    pk = dyadic_diamond_packing(UNIT, 3)
    # sample a fine grid, count how many diamonds hold each point
    xs = (np.arange(400) + 0.5) / 400
    X, Y = np.meshgrid(xs, xs)
    hits = np.zeros(X.shape, dtype=int)
    for d in pk.diamonds:
        cx, cy = d.center
        hits += (np.abs(X - cx) / (d.d1 / 2) + np.abs(Y - cy) / (d.d2 / 2) < 1).astype(int)
    assert hits.max() == 1


def test_packing_rejects_negative():
    with pytest.raises(InvalidParameter):
        dyadic_diamond_packing(UNIT, -1)


def test_bucket_params_exact_grid():
    lam = 2.0
    delta = lam ** (-3 + 0.5)
    bp = make_bucket_params(lam, delta)
    assert bp.J == 3 and bp.exact
    assert rect_class(1.0, bp) == bp.J - 1
    assert rect_class(1 / delta, bp) == 0
    assert rect_class(lam ** 2 / delta, bp) == -2


@given(st.floats(1.1, 4.0), st.floats(0.01, 0.9), st.floats(1.0, 1e4))
def test_rect_class_interval_membership(lam, delta, L):
    bp = make_bucket_params(lam, delta)
    j = rect_class(L, bp)
    lo, hi = bp.interval(j)
    assert lo * (1 - 1e-12) <= L < hi * (1 + 1e-12)
    assert rect_class_array(np.array([L]), bp)[0] == j


def test_rect_class_of_rect_uses_aspect():
    bp = make_bucket_params(2.0, 0.1)
    assert rect_class(Rect(0, 0, 4.0, 0.5), bp) == rect_class(8.0, bp)
    assert rect_class(Rect(0, 0, 0.5, 4.0), bp) == rect_class(8.0, bp)


def test_tail_threshold():
    j1 = tail_threshold(1.0, 2.0, 1e-3)
    assert 2.0 ** j1 / 0.5 <= 1e-3 < 2.0 ** (j1 + 1) / 0.5


def test_quadrants():
    r = Rect(1.0, 2.0, 4.0, 2.0)
    qs = rect_subdivide_quadrants(r)
    assert sum(q.area for q in qs) == r.area
    assert qs[0].corners() == (1.0, 2.0, 3.0, 3.0)
    assert qs[3].corners() == (3.0, 3.0, 5.0, 4.0)
    assert quadrant_of(r, 4.0, 3.5) == 3
    assert quadrant_of(r, 3.0, 3.0) == 0  # ties go low


@given(st.floats(0.01, 0.99), st.sampled_from([0, 1]))
def test_cut_at_fraction_diamond(frac, axis):
    poly = np.array([[0.0, 0.5], [0.5, 0.0], [1.0, 0.5], [0.5, 1.0]])
    c = cut_at_fraction(poly, axis, frac)
    from martensim.geometry import clip_axis
    assert poly_area(clip_axis(poly, axis, c, True)) == pytest.approx(frac * 0.5, abs=1e-12)


def test_rect_helpers():
    r = Rect.from_corners(0, 0, 2, 0.5)
    assert r.aspect == 4.0 and r.area == 1.0
    assert poly_area(r.polygon()) == 1.0
    assert math.isclose(poly_area(r.polygon()[::-1]), -1.0)
