from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracmax.averages import (
    OperatorParams,
    ball_integral_direct,
    ball_kernel_weight,
    ball_volume_discrete,
    discrete_ball_weight,
    sphere_integral,
    sphere_kernel_weight,
)
from fracmax.catalog import default_battery, sample_function
from fracmax.errors import ConfigError, GridMismatchError
from fracmax.grid import Box, Disk, GridSpec, Interval, ScalarField, rasterize_domain
from fracmax.maximal import (
    KlParams,
    k_l_field,
    k_l_radius_index,
    maximal_field,
    reduce_check,
    spherical_maximal_field,
)

P = OperatorParams


def _oracle(f, mask, params, kind):
    """Radius-grid maximum by direct per-point enumeration."""
    g = f.grid
    absf = f.abs()
    val = np.zeros(g.shape)
    arg = np.zeros(g.shape)
    k_lo, k_hi = params.k_window(g.h)
    for idx in np.argwhere(mask.inside):
        idx = tuple(idx)
        best, best_k = -1.0, 0
        for k in range(k_lo, min(k_hi, int(mask.kmax[idx])) + 1):
            r = k * g.h
            if kind == "ball":
                w = (discrete_ball_weight(r, params, g) if params.normalization == "discrete"
                     else ball_kernel_weight(r, params, g.dim))
                v = w * ball_integral_direct(absf, idx, r)
            else:
                v = sphere_kernel_weight(r, params, g.dim) * sphere_integral(absf, idx, r)
            if v > best * (1 + 1e-12):
                best, best_k = v, k
        if best_k:
            val[idx], arg[idx] = best, best_k * g.h
    return val, arg


def _close(a, b, rtol=1e-12):
    return np.all(np.abs(a - b) <= rtol * np.maximum(1.0, np.abs(b)))


CASES = [
    (1, 41, P(1.0, 0.0)),
    (1, 41, P(0.5, 1.0, normalization="discrete")),
    (2, 21, P(1.0, 0.5)),
    (2, 21, P(0.0, 2.0, branch="small", normalization="discrete")),
]


@pytest.mark.parametrize("dim,n,params", CASES)
@pytest.mark.parametrize("fid", [1, 3])
def test_ball_field_matches_oracle(dim, n, params, fid):
    g = GridSpec.uniform(dim, n, 0, 1)
    mask = rasterize_domain(g, Box((0,) * dim, (1,) * dim))
    f = sample_function(g, default_battery(dim)[fid])
    got = maximal_field(f, mask, params)
    val, arg = _oracle(f, mask, params, "ball")
    assert _close(got.values.values, val)
    assert np.allclose(got.argmax_radius, arg, atol=1e-14)


@pytest.mark.parametrize("dim,n,params", CASES)
def test_sphere_field_matches_oracle(dim, n, params):
    g = GridSpec.uniform(dim, n, 0, 1)
    mask = rasterize_domain(g, Box((0,) * dim, (1,) * dim))
    f = sample_function(g, default_battery(dim)[3])
    got = spherical_maximal_field(f, mask, params)
    val, arg = _oracle(f, mask, params, "sphere")
    assert _close(got.values.values, val, 1e-11)
    assert np.allclose(got.argmax_radius, arg, atol=1e-14)


def _ones(dim, n, lo=0.0, hi=1.0, shape=None):
    g = GridSpec.uniform(dim, n, lo, hi)
    mask = rasterize_domain(g, shape or Box((lo,) * dim, (hi,) * dim))
    return ScalarField(g, np.ones(g.shape)), mask


@pytest.mark.parametrize("dim", [1, 2])
def test_constant_discrete_average_is_one_with_smallest_radius(dim):
    one, mask = _ones(dim, 33)
    for branch in ("all", "small"):
        m = maximal_field(one, mask, P(branch=branch, normalization="discrete"))
        d = m.defined
        assert np.allclose(m.values.values[d], 1.0, rtol=1e-13)
        # every radius ties, so the smallest one wins
        assert np.all(m.argmax_radius[d] == pytest.approx(one.grid.h))


def test_constant_beta_one_grows_with_radius():
    one, mask = _ones(1, 11)
    m = maximal_field(one, mask, P(beta=1.0))
    # r_k * (2k-1)h / (2 r_k) at the largest admissible k=4
    assert m.values.values[5] == pytest.approx(7 * 0.1 / 2, rel=1e-13)
    assert m.argmax_radius[5] == pytest.approx(0.4)


def test_constant_damped_value_matches_radius_oracle():
    one, mask = _ones(1, 11)
    params = P(beta=0.0, gamma=1.0)
    m = maximal_field(one, mask, params)
    vals = [ball_kernel_weight(k * 0.1, params, 1) * ball_volume_discrete(one.grid, k * 0.1) for k in (1, 2, 3, 4)]
    assert m.values.values[5] == pytest.approx(max(vals), rel=1e-13)
    assert m.argmax_radius[5] == pytest.approx(0.1 * (1 + int(np.argmax(vals))))
    assert m.values.values[5] < 1


def test_sphere_examples():
    g = GridSpec.uniform(2, 33, 0, 1)
    mask = rasterize_domain(g, Disk((0.5, 0.5), 0.45))
    m = spherical_maximal_field(ScalarField(g, np.ones(g.shape)), mask, P())
    assert np.allclose(m.values.values[m.defined], 1.0, rtol=1e-12)
    one, mask1 = _ones(1, 11)
    s = spherical_maximal_field(one, mask1, P(beta=1.0))
    assert s.values.values[5] == pytest.approx(0.5 - 0.1, rel=1e-13)


@given(arrays(np.float64, 31, elements=st.floats(0, 10)))
def test_sphere_average_bounded_by_max_1d(values):
    g = GridSpec.uniform(1, 31, 0, 1)
    mask = rasterize_domain(g, Interval(0, 1))
    s = spherical_maximal_field(ScalarField(g, values), mask, P())
    assert np.all(s.values.values <= values.max() * (1 + 1e-14))


def test_k_l_examples():
    one, mask = _ones(1, 41)
    kl = k_l_field(one, mask, KlParams(0.5, P(normalization="discrete")))
    assert np.allclose(kl.values.values[kl.defined], 1.0, rtol=1e-13)
    lin = ScalarField(one.grid, 3 * one.grid.axis(0) - 1)
    kl = k_l_field(lin, mask, KlParams(0.5, P(normalization="discrete")))
    assert np.allclose(kl.values.values[kl.defined], lin.values[kl.defined], atol=1e-13)
    # radius is the largest grid radius below l*sigma
    assert k_l_radius_index(mask, 0.5)[20] == 10
    assert k_l_radius_index(mask, 0.3)[20] == 6


def test_k_l_parameter_range():
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ConfigError):
            KlParams(bad)


@pytest.mark.parametrize("dim,n", [(1, 65), (2, 33)])
@pytest.mark.parametrize("l", [0.2, 0.5, 0.9])
def test_k_l_below_maximal_field(dim, n, l):
    g = GridSpec.uniform(dim, n, 0, 1)
    mask = rasterize_domain(g, Box((0,) * dim, (1,) * dim))
    for spec in default_battery(dim):
        f = sample_function(g, spec)
        for params in (P(0.5, 0.0), P(0.0, 1.0), P(0.5, 1.0, normalization="discrete")):
            kl = k_l_field(f, mask, KlParams(l, params))
            m = maximal_field(f, mask, params)
            d = kl.defined
            assert np.all(kl.values.values[d] <= m.values.values[d] * (1 + 1e-13) + 1e-15)


@pytest.mark.parametrize("dim,n", [(1, 161), (2, 41)])
def test_all_branch_is_max_of_small_and_large(dim, n):
    g = GridSpec.uniform(dim, n, 0, 4)
    mask = rasterize_domain(g, Box((0,) * dim, (4,) * dim))
    f = sample_function(g, default_battery(dim, 0, 4)[3])
    params = P(0.5, 1.0)
    full = maximal_field(f, mask, params)
    small = maximal_field(f, mask, params.with_(branch="small"))
    large = maximal_field(f, mask, params.with_(branch="large"))
    both = small.defined & large.defined
    assert both.sum() > 0
    assert np.array_equal(full.values.values[both], np.maximum(small.values.values, large.values.values)[both])
    only_small = small.defined & ~large.defined
    assert np.array_equal(full.values.values[only_small], small.values.values[only_small])


@pytest.mark.parametrize("dim,n", [(1, 161), (2, 41)])
def test_argmax_respects_window_and_sigma(dim, n):
    g = GridSpec.uniform(dim, n, 0, 4)
    mask = rasterize_domain(g, Box((0,) * dim, (4,) * dim))
    f = sample_function(g, default_battery(dim, 0, 4)[1])
    for branch in ("all", "small", "large"):
        for op in (maximal_field, spherical_maximal_field):
            m = op(f, mask, P(0.5, 0.5, branch=branch))
            r = m.argmax_radius[m.defined]
            assert np.all(r < mask.sigma[m.defined])
            if branch == "small":
                assert np.all(r < 1)
            if branch == "large":
                assert np.all(r >= 1 - 1e-12)
            assert np.all(m.values.values >= 0)
            assert np.all(m.values.values[~m.defined] == 0)


@given(arrays(np.float64, (12, 12), elements=st.floats(-20, 20)),
       arrays(np.float64, (12, 12), elements=st.floats(-20, 20)))
def test_sublinear_and_monotone(a, b):
    g = GridSpec(2, (12, 12), 1 / 11, (0.0, 0.0))
    mask = rasterize_domain(g, Box((0, 0), (1, 1)))
    params = P(0.5, 1.0)
    for op in (maximal_field, spherical_maximal_field):
        fa = op(ScalarField(g, a), mask, params).values.values
        fb = op(ScalarField(g, b), mask, params).values.values
        fab = op(ScalarField(g, a + b), mask, params).values.values
        scale = 1e-12 * (1 + np.abs(a).max() + np.abs(b).max())
        assert np.all(fab <= fa + fb + scale)
        big = op(ScalarField(g, np.abs(a) + np.abs(b)), mask, params).values.values
        assert np.all(fa <= big + scale)


def test_zero_field_gives_zero():
    g = GridSpec.uniform(2, 17, 0, 1)
    mask = rasterize_domain(g, Disk((0.5, 0.5), 0.45))
    z = ScalarField(g, np.zeros(g.shape))
    for op in (maximal_field, spherical_maximal_field):
        assert np.all(op(z, mask, P(1.0, 1.0)).values.values == 0)


def test_grid_mismatch_rejected():
    one, mask = _ones(1, 11)
    other = ScalarField(GridSpec.uniform(1, 12), np.ones(12))
    with pytest.raises(GridMismatchError):
        maximal_field(other, mask, P())


@pytest.mark.parametrize("dim,n", [(1, 65), (2, 33)])
def test_reduce_check_examples(dim, n):
    g = GridSpec.uniform(dim, n, 0, 1)
    mask = rasterize_domain(g, Box((0,) * dim, (1,) * dim))
    for spec in default_battery(dim):
        f = sample_function(g, spec)
        for params in (P(1.0 if dim == 2 else 0.5, 0.0), P(0.5, 1.5)):
            rep = reduce_check(f, mask, params)
            assert rep.passed, rep.values
            assert rep.values["fractional_rel_err"] <= 1e-12
            assert rep.values["plain_rel_err"] <= 1e-12
            if params.gamma > 0:
                assert rep.values["damping_excess"] <= 0
    one = ScalarField(g, np.ones(g.shape))
    assert reduce_check(one, mask, P()).passed


def test_metadata_records_kind_and_params():
    one, mask = _ones(1, 11)
    meta = k_l_field(one, mask, KlParams(0.5, P(beta=0.5))).metadata()
    assert meta["kind"] == "k_l" and meta["l"] == 0.5 and meta["params"]["beta"] == 0.5
    assert math.isclose(meta["grid"]["spacing"], 0.1)
