import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from siedd.coords import (
    EpochSampler,
    PosEncoding,
    default_sample_count,
    make_grid,
    pos_encode,
)
from siedd.nn import ConfigError


def test_two_by_two_grid():
    g = make_grid(2, 2, 1)
    expected = [[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]]
    assert g.coords.tolist() == expected


def test_patch_centres_coincide_with_coarse_grid():
    assert np.array_equal(make_grid(4, 4, 2).coords, make_grid(2, 2, 1).coords)


def test_1080p_grid_size():
    g = make_grid(1080, 1920, 1)
    assert len(g) == 2_073_600
    assert g.coords.min() > -1 and g.coords.max() < 1


def test_grid_rejects_bad_patch():
    with pytest.raises(ConfigError):
        make_grid(10, 12, 4)
    with pytest.raises(ConfigError):
        make_grid(0, 4, 1)


def test_grid_row_major_order():
    g = make_grid(3, 4, 1)
    xy = g.coords.reshape(3, 4, 2)
    assert np.all(np.diff(xy[..., 0], axis=1) > 0)  # x fastest
    assert np.all(np.diff(xy[..., 1], axis=0) > 0)
    assert np.all(xy[:, :, 1] == xy[:, :1, 1])


@settings(max_examples=40, deadline=None)
@given(h=st.integers(1, 12), w=st.integers(1, 12), k=st.integers(1, 4))
def test_grid_nesting(h, w, k):
    assert np.array_equal(make_grid(h * k, w * k, k).coords, make_grid(h, w, 1).coords)


@settings(max_examples=20, deadline=None)
@given(h=st.integers(1, 10), w=st.integers(1, 10))
def test_doubling_halves_nearest_neighbour_distance(h, w):
    coarse, fine = make_grid(h, w).coords.astype(np.float64), make_grid(2 * h, 2 * w).coords.astype(np.float64)

    def max_nn(points, queries):
        d = np.abs(queries[:, None, :] - points[None, :, :]).max(axis=2)  # chebyshev
        return d.min(axis=1).max()

    # probe the closed square, boundary included
    px, py = np.meshgrid(np.linspace(-1, 1, 16 * w + 1), np.linspace(-1, 1, 16 * h + 1))
    probe = np.stack([px.ravel(), py.ravel()], axis=1)
    assert math.isclose(max_nn(fine, probe), max_nn(coarse, probe) / 2, rel_tol=1e-5)
    # the fine grid interleaves the coarse one: every coarse point is surrounded by fine points
    assert fine[:, 0].min() < coarse[:, 0].min() and fine[:, 0].max() > coarse[:, 0].max()


def test_encoding_at_origin():
    out = pos_encode(PosEncoding(1, True), np.zeros((1, 2), np.float32))
    assert out.tolist() == [[0, 0, 0, 1, 0, 1]]


def test_encoding_without_frequencies_is_identity():
    c = make_grid(3, 5).coords
    assert np.array_equal(pos_encode(PosEncoding(0, True), c), c)


def test_encoding_scalar_oracle():
    x, y = 0.25, -0.5
    expected = [x, y]
    for c in (x, y):
        for k in range(2):
            expected += [math.sin(2**k * math.pi * c), math.cos(2**k * math.pi * c)]
    got = pos_encode(PosEncoding(2, True), np.array([[x, y]], np.float32))
    assert got.shape == (1, PosEncoding(2, True).out_dim) == (1, 10)
    assert np.allclose(got[0], expected, atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(L=st.integers(0, 12), raw=st.booleans(), seed=st.integers(0, 100))
def test_encoding_bounds_and_dims(L, raw, seed):
    if L == 0 and not raw:
        with pytest.raises(ConfigError):
            PosEncoding(L, raw)
        return
    enc = PosEncoding(L, raw)
    c = np.random.default_rng(seed).uniform(-1, 1, (50, 2)).astype(np.float32)
    out = pos_encode(enc, c)
    assert out.shape == (50, 4 * L + (2 if raw else 0))
    assert np.all(np.abs(out) <= 1.0)


def test_sampler_full_batch_is_permutation():
    s = EpochSampler(8, 8, seed=1)
    assert sorted(s.next_batch().tolist()) == list(range(8))


def test_sampler_partial_batches():
    s = EpochSampler(8, 3, seed=1)
    batches = [s.next_batch() for _ in range(3)]
    assert [len(b) for b in batches] == [3, 3, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(8))
    nxt = s.next_batch()
    assert s.epoch == 1 and len(nxt) == 3


def test_sampler_determinism_over_epochs():
    a, b = EpochSampler(50, 7, seed=99), EpochSampler(50, 7, seed=99)
    for _ in range(5 * 8):
        assert np.array_equal(a.next_batch(), b.next_batch())
    assert a.epoch >= 4


def test_sampler_reshuffles_each_epoch():
    s = EpochSampler(100, 100, seed=3)
    assert not np.array_equal(s.next_batch(), s.next_batch())


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 60), c=st.integers(1, 70), seed=st.integers(0, 2**63))
def test_sampler_coverage(n, c, seed):
    s = EpochSampler(n, c, seed)
    for _ in range(3):
        seen = []
        while True:
            seen.extend(s.next_batch().tolist())
            if s.cursor >= n:
                break
        assert sorted(seen) == list(range(n))


def test_sampler_rejects_zero_batch():
    with pytest.raises(ConfigError):
        EpochSampler(10, 0)


def test_default_sample_count():
    assert default_sample_count(1080, 1920) == 2025
    assert default_sample_count(32, 32) == 1
    assert default_sample_count(2160, 3840) == 3840 * 2160 // 1024 == 8100
