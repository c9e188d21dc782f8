import json

import numpy as np
import pytest

from martensim.blocks import (InvalidPlacement, Microstructure, PlacedBlocks, build_block,
                              instantiate_block, make_library)
from martensim.core import HORIZONTAL, UNRESOLVED, VERTICAL, det, in_wells
from martensim.geometry import Rect


def tol(depth):
    return 0.35 * 2.0 ** -depth


@pytest.mark.parametrize("depth", range(0, 5))
def test_block_invariants(wells, bdata, depth):
    z = build_block(1, bdata, wells, 0.4, depth)
    a = z.areas
    assert np.all(a > 0)
    assert a.sum() == pytest.approx(z.domain.area, rel=1e-9)
    # independent area-weighted average
    avg = sum(a[i] * z.matrices[i] for i in range(len(z))) / a.sum()
    np.testing.assert_allclose(avg, bdata.m, atol=tol(depth))
    for i in range(len(z)):
        assert det(z.matrices[i]) == pytest.approx(1, abs=1e-9)
        if z.family[i] != UNRESOLVED:
            assert in_wells(z.matrices[i], wells, tol=1e-9)
    if depth >= 1:
        assert z.unresolved_fraction() <= tol(depth)


def test_depth_zero_is_single_region(wells, bdata):
    z = build_block(2, bdata, wells, 0.4, 0)
    assert len(z) == 1 and z.family[0] == UNRESOLVED
    np.testing.assert_array_equal(z.mean_gradient(), bdata.m)


def test_unresolved_fraction_decays(wells, bdata):
    f = [build_block(1, bdata, wells, 0.4, d).unresolved_fraction() for d in range(0, 6)]
    assert all(b < a for a, b in zip(f, f[1:]))


def test_first_family_matches_orientation(lib):
    # the largest resolved region in each block is a first-generation laminate
    for orient, fam in ((1, HORIZONTAL), (2, VERTICAL)):
        z = lib.block(orient)
        res = z.family != UNRESOLVED
        big = np.argmax(np.where(res, z.areas, -1))
        assert z.family[big] == fam


def test_model_domains(lib):
    assert lib.z1.domain.corners() == (0.0, 0.0, 1.0, 0.4)
    assert lib.z2.domain.corners() == (0.0, 0.0, 0.4, 1.0)


def _inside_count(z, x, y):
    hits = np.zeros(len(x), dtype=int)
    for i in range(len(z)):
        p = z.polygon(i)
        q = np.roll(p, -1, axis=0)
        cross = ((q[:, 0] - p[:, 0])[:, None] * (y - p[:, 1:2])
                 - (q[:, 1] - p[:, 1])[:, None] * (x - p[:, 0:1]))
        hits += np.all(cross > 0, axis=0)
    return hits


def test_regions_disjoint_and_locate_agrees(lib):
    z = lib.z1
    rnd = np.random.default_rng(1)
    x, y = rnd.uniform(0, 1, 4000), rnd.uniform(0, 0.4, 4000)
    assert _inside_count(z, x, y).max() == 1
    idx = z.locate(x, y)
    assert np.all(idx >= 0)
    i = idx[:200]
    for k in range(200):
        assert _inside_count_one(z, i[k], x[k], y[k])


def _inside_count_one(z, i, x, y):
    p = z.polygon(i)
    q = np.roll(p, -1, axis=0)
    cross = (q[:, 0] - p[:, 0]) * (y - p[:, 1]) - (q[:, 1] - p[:, 1]) * (x - p[:, 0])
    return bool(np.all(cross >= -1e-12))


@pytest.mark.parametrize("n", [1, 3])
def test_instantiate_counts_and_area(lib, n):
    lam = 0.25
    target = Rect(0.1, 0.2, n * lam, 0.4 * lam)
    ms = instantiate_block(lib, 1, target, n_copies=n)
    assert len(ms) == n * len(lib.z1)
    assert ms.areas.sum() == pytest.approx(target.area, rel=1e-9)
    np.testing.assert_allclose(ms.mean_gradient(), lib.z1.mean_gradient(), atol=1e-12)


def test_instantiate_vertical(lib):
    target = Rect(0.0, 0.0, 0.4 * 0.5, 2 * 0.5)
    ms = instantiate_block(lib, 2, target, n_copies=2)
    assert len(ms) == 2 * len(lib.z2)


def test_instantiate_shape_mismatch(lib):
    with pytest.raises(InvalidPlacement):
        instantiate_block(lib, 1, Rect(0, 0, 1.0, 0.3), n_copies=1)
    with pytest.raises(InvalidPlacement):
        instantiate_block(lib, 1, Rect(0, 0, 1.0, 0.4), n_copies=0)


def test_placed_blocks_agree_with_instantiation(lib):
    rects = [(0.0, 0.0, 1.0, 0.4), (0.0, 0.4, 0.2, 0.4 + 2 * 0.2 / 0.4)]
    pb = PlacedBlocks(rects, [1, 2], [1, 2], lib)
    rnd = np.random.default_rng(3)
    x, y = rnd.uniform(0, 1, 3000), rnd.uniform(0, 1.4, 3000)
    band, region, ori = pb.locate(x, y)
    for b, (x0, y0, x1, y1) in enumerate(rects):
        o = 1 if b == 0 else 2
        ms = instantiate_block(lib, o, Rect.from_corners(x0, y0, x1, y1), n_copies=1 if b == 0 else 2)
        sel = band == b
        want = ms.locate(x[sel], y[sel])
        nreg = len(lib.block(o))
        np.testing.assert_array_equal(region[sel], want % nreg)
    assert np.all(band[(x > 0.2) & (y > 0.4)] == -1)


def test_jsonl_round_trip(lib):
    z = lib.z1
    text = z.to_jsonl()
    first = json.loads(text.splitlines()[0])
    assert set(first) >= {"shape_type", "coords", "label", "matrix"}
    back = Microstructure.from_jsonl(text, z.domain, depth=z.depth)
    np.testing.assert_allclose(back.matrices, z.matrices)
    np.testing.assert_allclose(back.areas, z.areas)
    np.testing.assert_array_equal(back.family, z.family)


def test_library_is_cached(bdata, wells, lib):
    assert make_library(bdata, wells, 0.4, 3) is lib
