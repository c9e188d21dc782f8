import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martensim import kernels, rng


def _numpy_philox(seed, c0, c1, c2, c3=0):
    k0, k1 = rng.seed_key(seed)
    # numpy increments the counter before each block, so start one below
    ctr = c0 | (c1 << 64) | (c2 << 128) | (c3 << 192)
    ctr = (ctr - 1) % (1 << 256)
    words = [(ctr >> (64 * i)) & ((1 << 64) - 1) for i in range(4)]
    bg = np.random.Philox(key=np.array([k0, k1], dtype=np.uint64),
                          counter=np.array(words, dtype=np.uint64))
    return bg.random_raw(4)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
@given(seed=st.integers(0, 2 ** 70), c0=st.integers(1, 2 ** 40), c1=st.integers(0, 2 ** 20),
       stream=st.integers(0, 3))
def test_philox_matches_numpy(backend, seed, c0, c1, stream):
    with kernels.use_backend(backend):
        got = rng.words(seed, c0, c1, stream)[0]
    np.testing.assert_array_equal(got, _numpy_philox(seed, c0, c1, stream))


def test_uniforms_in_open_interval():
    u = rng.uniform_block(7, rng.STREAM_MC, 0, 100001)
    assert u.shape == (100001,)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005


def test_to_unit_extremes():
    w = np.array([0, 2 ** 64 - 1], dtype=np.uint64)
    u = kernels.to_unit(w)
    assert 0 < u[0] < 1e-15 and 1 - 1e-15 < u[1] < 1


def test_draws_depend_only_on_key():
    a = rng.uniforms(3, np.arange(10), 5, rng.STREAM_PLACE)
    b = rng.uniforms(3, np.array([7]), 5, rng.STREAM_PLACE)
    np.testing.assert_array_equal(a[7], b[0])
    c = rng.uniforms(3, np.array([7]), 5, rng.STREAM_MODEL_B)
    assert not np.array_equal(b, c)
