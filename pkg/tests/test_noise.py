import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accelmlmc.noise import (RngStreamSpec, aggregate, ihat, sample_coupled, sample_increments,
                             sample_two_point)

seeds = st.integers(0, 2**63 - 1)
paths = st.lists(st.integers(0, 10_000), max_size=3).map(tuple)


def test_two_step_aggregation():
    inc = sample_coupled(RngStreamSpec(3), 2, 3, 0.5, 2)
    assert inc.coarse.shape == (1, 1, 3)
    assert np.array_equal(inc.coarse[0], inc.fine[0] + inc.fine[1])
    assert inc.h_coarse == 1.0


@given(seeds, paths, st.integers(2, 5), st.integers(1, 4), st.integers(1, 3))
def test_aggregation_exact_in_ascending_order(seed, path, M, blocks, m):
    inc = sample_coupled(RngStreamSpec(seed, path), M * blocks, m, 0.1, M, n_paths=7)
    for n in range(blocks):
        acc = inc.fine[n * M].copy()
        for r in range(1, M):
            acc = acc + inc.fine[n * M + r]
        assert np.array_equal(inc.coarse[n], acc)


@given(seeds, paths, st.floats(1e-6, 10))
def test_two_point_values(seed, path, h):
    tp = sample_two_point(RngStreamSpec(seed, path), 4, 3, h, 5)
    assert np.all(np.abs(tp) == math.sqrt(h))


@given(seeds, paths)
def test_reproducible(seed, path):
    a = sample_coupled(RngStreamSpec(seed, path), 8, 2, 0.125, 2, n_paths=3, coarse_two_point=True)
    b = sample_coupled(RngStreamSpec(seed, path), 8, 2, 0.125, 2, n_paths=3, coarse_two_point=True)
    for x, y in [(a.fine, b.fine), (a.coarse, b.coarse), (a.two_point, b.two_point),
                 (a.coarse_two_point, b.coarse_two_point)]:
        assert np.array_equal(x, y)


def test_two_point_lane_does_not_shift_gaussians():
    spec = RngStreamSpec(11, (4, 2))
    with_tp, tp = sample_increments(spec, 16, 3, 0.01, 9, two_point=True)
    without, none = sample_increments(spec, 16, 3, 0.01, 9, two_point=False)
    assert none is None and tp is not None
    assert np.array_equal(with_tp, without)


def test_distinct_paths_differ():
    a, _ = sample_increments(RngStreamSpec(1, (0,)), 4, 1, 1.0, 4)
    b, _ = sample_increments(RngStreamSpec(1, (1,)), 4, 1, 1.0, 4)
    c, _ = sample_increments(RngStreamSpec(2, (0,)), 4, 1, 1.0, 4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_child_extends_path():
    assert RngStreamSpec(5, (1,)).child(2, 3) == RngStreamSpec(5, (1, 2, 3))


def test_gaussian_mean_clt_bound():
    h, n = 0.3, 10**6
    dW, _ = sample_increments(RngStreamSpec(21), 1, 1, h, n)
    assert abs(dW.mean()) <= 4 * math.sqrt(h / n)
    assert dW.var() == pytest.approx(h, rel=0.01)


def test_two_point_variance():
    h = 0.07
    tp = sample_two_point(RngStreamSpec(22), 1, 1, h, 10**6)
    assert tp.var(ddof=1) == pytest.approx(h, rel=0.01)
    assert abs(tp.mean()) <= 4 * math.sqrt(h / 1e6)


def test_rejections():
    with pytest.raises(ValueError):
        sample_coupled(RngStreamSpec(0), 3, 1, 0.1, 2)
    with pytest.raises(ValueError):
        sample_coupled(RngStreamSpec(0), 4, 1, 0.0, 2)
    with pytest.raises(ValueError):
        sample_coupled(RngStreamSpec(0), 4, 1, -1.0, 2)
    with pytest.raises(ValueError):
        sample_coupled(RngStreamSpec(0), 4, 1, 0.1, 1)
    with pytest.raises(ValueError):
        aggregate(np.zeros((5, 1, 1)), 2)


def test_ihat_examples():
    h = 0.4
    I = np.array([math.sqrt(h), 0.3])
    assert ihat(I, np.ones(2), h, 1, 1) == pytest.approx(0.0, abs=1e-16)
    assert ihat(np.zeros(2), np.ones(2), 1.0, 1, 2) == -0.5
    assert ihat(np.zeros(2), np.ones(2), 1.0, 2, 1) == 0.5


def test_ihat_index_range():
    with pytest.raises(IndexError):
        ihat(np.zeros(2), np.ones(2), 1.0, 0, 1)
    with pytest.raises(IndexError):
        ihat(np.zeros(2), np.ones(2), 1.0, 1, 3)


@given(seeds, st.integers(2, 6), st.floats(1e-4, 2))
def test_ihat_offdiagonal_pairs_sum_to_product(seed, m, h):
    dW, tp = sample_increments(RngStreamSpec(seed), 1, m, h, 1, two_point=True)
    I, t = dW[0, 0], tp[0, 0]
    for k in range(1, m + 1):
        for j in range(k + 1, m + 1):
            total = ihat(I, t, h, k, j) + ihat(I, t, h, j, k)
            assert total == pytest.approx(I[k - 1] * I[j - 1], rel=1e-12, abs=1e-15)


def test_ihat_second_moment():
    # E[(I_k I_j - sqrt(h) Ĩ_k)^2]/4 = (h^2 + h^2)/4 = h^2/2
    h, n = 0.5, 10**6
    dW, tp = sample_increments(RngStreamSpec(23), 1, 2, h, n, two_point=True)
    v = ihat(dW[0], tp[0], h, 1, 2)
    assert np.mean(v * v) == pytest.approx(h * h / 2, rel=0.02)
