import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martensim.core import (DegenerateSplit, InvalidParameter, OutsideHull, cauchy_green,
                            det, in_wells, is_interior, lamination_split, make_boundary_data,
                            make_wells, phi, rank_one_residual, twin_split)
from martensim.fragment import DEFAULT_M


def test_wells_gamma_half(wells):
    np.testing.assert_array_equal(wells.f0, [[1, 0.5], [0, 1]])
    np.testing.assert_array_equal(wells.f0inv, [[1, -0.5], [0, 1]])
    assert det(wells.f0) == 1.0


@pytest.mark.parametrize("g", [0.0, -1.0, float("nan"), float("inf")])
def test_wells_reject_bad_gamma(g):
    with pytest.raises(InvalidParameter):
        make_wells(g)


def test_boundary_data_figure_matrix(bdata):
    c = bdata.c
    assert det(bdata.m) == pytest.approx(1.0, abs=1e-15)
    assert c[0, 0] == pytest.approx(0.8817, abs=1e-4)
    # second row rescaled by 1/det, so C22 = (1/0.939)^2 exactly
    assert c[1, 1] == pytest.approx((1 / 0.939) ** 2, abs=1e-12)
    assert c[0, 0] < 1 and c[1, 1] < 1.25


def test_boundary_data_is_idempotent(wells, bdata):
    again = make_boundary_data(bdata.m, wells)
    np.testing.assert_allclose(again.m, bdata.m, rtol=0, atol=1e-15)


@pytest.mark.parametrize("m", [np.eye(2), np.diag([2.0, 0.5]), np.diag([1.0, -1.0])])
def test_boundary_data_outside_hull(wells, m):
    with pytest.raises(OutsideHull):
        make_boundary_data(m, wells)


@pytest.mark.parametrize("normal", ["e1", "e2"])
def test_lamination_split_postconditions(wells, bdata, normal):
    g = bdata.m
    gp, gm, mu = lamination_split(g, normal, wells)
    assert 0 < mu < 1
    np.testing.assert_allclose(mu * gp + (1 - mu) * gm, g, atol=1e-14)
    assert rank_one_residual(gp, gm, normal) < 1e-9
    assert det(gp) == pytest.approx(1, abs=1e-12) and det(gm) == pytest.approx(1, abs=1e-12)
    assert max(phi(gp, wells), phi(gm, wells)) < phi(g, wells)
    # endpoints on the first-order laminate boundary
    idx = 0 if normal == "e1" else 1
    target = 1.0 if normal == "e1" else 1.25
    for a in (gp, gm):
        assert cauchy_green(a)[idx, idx] == pytest.approx(target, abs=1e-12)


def test_lamination_split_boundary_matrix_is_degenerate(wells):
    with pytest.raises(DegenerateSplit):
        lamination_split(np.eye(2), "e1", wells)


@pytest.mark.parametrize("outer,twin", [("e1", "e2"), ("e2", "e1")])
def test_twin_split_hits_wells(wells, bdata, outer, twin):
    gp, gm, _ = lamination_split(bdata.m, outer, wells)
    for g in (gp, gm):
        wp, wm, nu = twin_split(g, twin, wells)
        assert 0 < nu < 1
        assert in_wells(wp, wells) and in_wells(wm, wells)
        np.testing.assert_allclose(nu * wp + (1 - nu) * wm, g, atol=1e-14)
        assert rank_one_residual(wp, wm, twin) < 1e-12


def test_twin_split_requires_laminate_matrix(wells, bdata):
    with pytest.raises(DegenerateSplit):
        twin_split(bdata.m, "e2", wells)


@given(st.floats(0.6, 0.99), st.floats(-0.3, 0.3), st.floats(0.05, 1.0))
def test_split_is_convex_and_decreasing(a, b, gam):
    w = make_wells(gam)
    g = np.array([[a, b], [0.0, 1.0 / a]])
    if not is_interior(g, w):
        return
    for normal in ("e1", "e2"):
        gp, gm, mu = lamination_split(g, normal, w)
        assert 0 < mu < 1
        np.testing.assert_allclose(mu * gp + (1 - mu) * gm, g, atol=1e-12)
        assert rank_one_residual(gp, gm, normal) < 1e-9
        assert max(phi(gp, w), phi(gm, w)) < phi(g, w) + 1e-15


def test_default_m_matches_figures():
    assert DEFAULT_M == ((0.939, 0.0), (0.0, 1.064))
