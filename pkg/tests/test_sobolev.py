import math

import numpy as np
import pytest
from scipy import integrate

from martensim.blocks import instantiate_block, microstructure_from_polygons
from martensim.fragment import SimConfig, run
from martensim.geometry import Rect
from martensim.sobolev import (FieldDiff, PlacedField, SobolevParams, UnsupportedParameters,
                               ZeroField, bv_norm, cutoff_bound, fit_decay, gagliardo_seminorm,
                               interpolation_bound, model_b_subsequence, step_difference_series)

UNIT = Rect(0.0, 0.0, 1.0, 1.0)
JUMP = np.array([[0.0, 1.0], [0.0, 0.0]])


def half_plane():
    return FieldDiff.from_rects([[0.5, 0.0, 1.0, 1.0]], [JUMP], UNIT)


def scipy_half_plane(sp, r_min):
    """Truncated Gagliardo integral of the half-plane jump by adaptive quadrature.

    Over offsets h = y - x the overlap measure of (left, right) pairs is
    min(h1, 1 - h1) (1 - |h2|); both orders of each pair are counted.
    """
    def f(h2, h1):
        return min(h1, 1 - h1) * (1 - h2) * (h1 * h1 + h2 * h2) ** (-1 - sp / 2)

    def lo(h1):
        return math.sqrt(r_min ** 2 - h1 ** 2) if h1 < r_min else 0.0

    opts = dict(epsabs=1e-10, epsrel=1e-8)
    near = integrate.dblquad(f, 0, r_min, lo, 1, **opts)[0]
    mid = integrate.dblquad(f, r_min, 0.5, 0, 1, **opts)[0]
    far = integrate.dblquad(f, 0.5, 1, 0, 1, **opts)[0]
    return 2 * 2 * (near + mid + far)  # h2 symmetry, pair order


def test_two_band_bv(wells):
    polys = [UNIT.polygon() * [0.5, 1], UNIT.polygon() * [0.5, 1] + [0.5, 0]]
    ms = microstructure_from_polygons(UNIT, polys, [wells.f0, wells.f0inv])
    bv = bv_norm(ms)
    assert bv.interface == pytest.approx(2 * wells.gamma, abs=1e-12)


def test_constant_field_bv_zero(bdata):
    polys = [UNIT.polygon() * [0.5, 1], UNIT.polygon() * [0.5, 1] + [0.5, 0]]
    ms = microstructure_from_polygons(UNIT, polys, [bdata.m, bdata.m])
    assert bv_norm(ms).interface == 0.0


def test_zero_fields_have_zero_norms():
    params = SobolevParams(0.3, 1.0, n_samples=1000)
    for f in (ZeroField(UNIT), FieldDiff.from_rects([[0, 0, 1, 1]], [np.zeros((2, 2))], UNIT)):
        g = gagliardo_seminorm(f, params, 1)
        assert (g.estimate, g.stderr, g.cutoff_bound) == (0.0, 0.0, 0.0)
        assert interpolation_bound(f, 0.3, 1.0).value_p == 0.0


def test_half_plane_against_scipy():
    sp, r_min = 0.5, 1e-2
    want = scipy_half_plane(sp, r_min)
    g = gagliardo_seminorm(half_plane(), SobolevParams(sp, 1.0, r_min, 400_000), 11)
    assert abs(g.estimate - want) <= 3 * g.stderr
    assert g.stderr < 0.02 * want


def test_unbiased_across_seeds():
    p = SobolevParams(0.25, 1.0, 1e-3, 100_000)
    a = gagliardo_seminorm(half_plane(), p, 1)
    b = gagliardo_seminorm(half_plane(), p, 2)
    assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.stderr, b.stderr)
    assert a.estimate != b.estimate


def test_deterministic_per_seed():
    p = SobolevParams(0.25, 1.0, 1e-3, 50_000)
    assert gagliardo_seminorm(half_plane(), p, 5) == gagliardo_seminorm(half_plane(), p, 5)


@pytest.mark.parametrize("lam", [0.5, 0.25])
def test_scaling_law(lib, lam):
    # scale the geometry and the cutoff together: the integral scales by lam^(2 - sp)
    s, p = 0.3, 1.0
    ms = lib.z1
    f = FieldDiff.from_microstructure(ms, plus=lib.m.m)
    g0 = gagliardo_seminorm(f, SobolevParams(s, p, 1e-3, 200_000), 3)
    fs = f.transformed(lam, lam)
    g1 = gagliardo_seminorm(fs, SobolevParams(s, p, 1e-3 * lam, 200_000), 4)
    want = lam ** (2 - s * p) * g0.estimate
    err = math.hypot(lam ** (2 - s * p) * g0.stderr, g1.stderr)
    assert abs(g1.estimate - want) <= 3 * err


def test_sp_at_least_one_rejected():
    with pytest.raises(UnsupportedParameters):
        SobolevParams(0.5, 2.0)
    with pytest.raises(UnsupportedParameters):
        interpolation_bound(half_plane(), 0.5, 2.0)


def test_cutoff_monotone_in_r_min():
    f = half_plane()
    sp = 0.4
    c1 = cutoff_bound(f, SobolevParams(sp, 1.0, 1e-4))
    c2 = cutoff_bound(f, SobolevParams(sp, 1.0, 1e-3))
    assert c1 < c2
    assert c1 / c2 == pytest.approx(0.1 ** (1 - sp))
    g1 = gagliardo_seminorm(f, SobolevParams(sp, 1.0, 1e-4, 100_000), 1)
    g2 = gagliardo_seminorm(f, SobolevParams(sp, 1.0, 1e-3, 100_000), 1)
    # the smaller cutoff's interval sits inside the larger one, inflated by 3 sigma
    assert g1.lower >= g2.lower - 3 * g2.stderr
    assert g1.upper <= g2.upper + 3 * g1.stderr


@pytest.mark.parametrize("s,p", [(0.2, 1.0), (0.4, 2.0), (0.1, 3.0)])
def test_interpolation_bound_dominates(lib, s, p):
    fields = [half_plane(), FieldDiff.from_microstructure(lib.z2, plus=lib.m.m)]
    for f in fields:
        ib = interpolation_bound(f, s, p)
        g = gagliardo_seminorm(f, SobolevParams(s, p, 1e-4, 50_000), 2)
        assert ib.value_p >= f.lp_power(p) + g.lower
        assert ib.value == pytest.approx(ib.value_p ** (1 / p))


def test_two_band_interpolation_closed_form(wells):
    f = FieldDiff.from_rects([[0.5, 0, 1, 1]], [wells.f0 - wells.f0inv], UNIT)
    sup, l1 = 2 * wells.gamma, 0.5 * 2 * wells.gamma
    bv = f.bv_total()
    assert f.sup_norm() == pytest.approx(sup) and f.l1_norm() == pytest.approx(l1)
    # interface at x = 1/2 plus the zero extension's jumps on the boundary
    assert bv == pytest.approx(sup * (1 + 0.5 + 0.5 + 1))
    ib = interpolation_bound(f, 0.3, 1.0)
    assert ib.classic_form == pytest.approx(l1 ** 0.7 * bv ** 0.3)


def test_placed_field_matches_instantiated(lib):
    target = Rect.from_corners(0.0, 0.3, 1.0, 0.7)
    pf = PlacedField([target.corners()], [1], [1], lib)
    fd = FieldDiff.from_microstructure(instantiate_block(lib, 1, target), plus=lib.m.m, domain=UNIT)
    rnd = np.random.default_rng(0)
    x, y = rnd.uniform(0, 1, 5000), rnd.uniform(0, 1, 5000)
    np.testing.assert_allclose(pf.eval(x, y), fd.eval(x, y), atol=1e-12)
    params = SobolevParams(0.2, 1.0, 1e-3, 200_000)
    a = gagliardo_seminorm(pf, params, 7)
    b = gagliardo_seminorm(fd, params, 8)
    assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.stderr, b.stderr)
    assert pf.lp_power(1.0) == pytest.approx(fd.lp_power(1.0), rel=1e-9)


def test_step_series_and_decay(lib):
    r = run(SimConfig(max_steps=6, seed=3))
    ser = step_difference_series(r, lib, SobolevParams(0.1, 1.0, 1e-4, 20_000), 1)
    assert len(ser.k) == len(r.series["volume"]) - 1
    assert np.all(ser.norm_p >= 0)
    empty = ser.lp_term == 0
    assert np.all(ser.gagliardo[empty] == 0)
    assert ser.to_csv().splitlines()[0] == "k,lp_term,gagliardo_estimate,stderr,cutoff_bound,bound_rhs"


def test_fit_decay_exact():
    k = np.arange(8)
    fit = fit_decay(k, 3.0 * 2.0 ** (-0.7 * k))
    assert fit.alpha == pytest.approx(0.7) and fit.log2_c == pytest.approx(math.log2(3))
    assert fit.r_squared == pytest.approx(1.0)


def test_model_b_subsequence():
    assert model_b_subsequence(20) == [0, 1, 3, 7, 15]
