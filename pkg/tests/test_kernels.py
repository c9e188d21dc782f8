import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martensim import kernels

pytestmark = pytest.mark.skipif("numba" not in kernels.BACKENDS, reason="numba missing")

RULES = [kernels.RULE_ORIGINAL, kernels.RULE_CHANGE1, kernels.RULE_AMOD]


def _batch(data, n):
    rnd = np.random.default_rng(data)
    x0 = rnd.uniform(-1, 1, n)
    y0 = rnd.uniform(-1, 1, n)
    w = 10 ** rnd.uniform(-4, 0, n)
    h = 10 ** rnd.uniform(-4, 0, n)
    px = x0 + rnd.uniform(0, 1, n) * w
    py = y0 + rnd.uniform(0, 1, n) * h
    d = rnd.integers(1, 3, n)
    return x0, y0, x0 + w, y0 + h, px, py, d


@given(seed=st.integers(0, 2 ** 32), rule=st.sampled_from(RULES),
       delta=st.floats(0.05, 0.7), literal=st.booleans(), c1_literal=st.booleans())
def test_place_backends_agree(seed, rule, delta, literal, c1_literal):
    args = _batch(seed, 64)
    a = kernels.place_np(*args, delta, rule, literal, c1_literal, 0.0)
    b = kernels.place_nb(*args, delta, rule, literal, c1_literal, 0.0)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


@given(seed=st.integers(0, 2 ** 32), rule=st.sampled_from(RULES), delta=st.floats(0.05, 0.7))
def test_place_conserves_area(seed, rule, delta):
    x0, y0, x1, y1, px, py, d = _batch(seed, 64)
    kind, band, ncop, quad, rem, nrem, length = kernels.place(
        x0, y0, x1, y1, px, py, d, delta, rule, False, False, 0.0)
    area = (x1 - x0) * (y1 - y0)
    got = (band[:, 2] - band[:, 0]) * (band[:, 3] - band[:, 1])
    for i in range(len(x0)):
        r = rem[i, :nrem[i]]
        pieces = (r[:, 2] - r[:, 0]) * (r[:, 3] - r[:, 1])
        assert np.all(pieces > 0)  # no degenerate slivers
        got[i] += pieces.sum()
    np.testing.assert_allclose(got, area, rtol=1e-12)
    # band inside its component
    assert np.all(band[:, 0] >= x0) and np.all(band[:, 2] <= x1)
    assert np.all(band[:, 1] >= y0) and np.all(band[:, 3] <= y1)


def test_place_min_length_rejects():
    args = _batch(1, 20)
    kind, *_ , nrem, length = kernels.place(*args, 0.4, kernels.RULE_ORIGINAL, False, False, 0.5)
    rej = kind == kernels.REJECTED
    assert np.array_equal(rej, length < 0.5)
    assert np.all(nrem[rej] == 0)


def test_locate_backends_agree():
    # two unit triangles tiling the square, padded to 4 vertices
    verts = np.array([[[0, 0], [1, 0], [1, 1], [1, 1]], [[0, 0], [1, 1], [0, 1], [0, 1]]], float)
    cell_start = np.array([0, 2])
    cell_items = np.array([0, 1])
    rnd = np.random.default_rng(0)
    px, py = rnd.uniform(-0.2, 1.2, 500), rnd.uniform(-0.2, 1.2, 500)
    a = kernels.locate_np(px, py, verts, cell_start, cell_items, 0.0, 0.0, 1.0, 1.0, 1)
    b = kernels.locate_nb(px, py, verts, cell_start, cell_items, 0.0, 0.0, 1.0, 1.0, 1)
    np.testing.assert_array_equal(a, b)
    inside = (px > 0) & (px < 1) & (py > 0) & (py < 1)
    assert np.all(a[~inside] == -1)
    assert np.all(a[inside & (py < px - 1e-9)] == 0)
    assert np.all(a[inside & (py > px + 1e-9)] == 1)


def test_use_backend_restores():
    before = kernels.BACKEND
    with kernels.use_backend("numpy"):
        assert kernels.place is kernels.place_np
    assert kernels.BACKEND == before
    with pytest.raises(ValueError):
        with kernels.use_backend("fortran"):
            pass
