from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import band_limited_field
from fhj.besov import (
    AliasingError,
    BesovSpec,
    besov_norm,
    besov_norm_differences,
    block_norms,
    build_partition,
    dilate,
    dyadic_block,
    interpolation_ratio,
    low_block,
    nonlinear_estimate_ratio,
    pointwise_inequality_check,
    pointwise_inequality_sides,
    scaling_check,
)
from fhj.presets import preset_initial_data
from fhj.spectral import TorusGrid, lq_norm


@pytest.fixture(scope="module")
def grid() -> TorusGrid:
    return TorusGrid(1, 1024, 100.0)


@pytest.fixture(scope="module")
def part(grid):
    return build_partition(grid)


def _corpus(grid, part, n, seed):
    rng = np.random.default_rng(seed)
    lo, hi = 2.0 ** (part.j_min + 2), 2.0 ** (part.j_max - 2)
    return [band_limited_field(grid, rng, lo, hi) for _ in range(n)]


def test_shell_range_at_reference_grid():
    part = build_partition(TorusGrid(1, 4096, 400.0))
    assert (part.j_min, part.j_max, part.n_shells) == (-6, 5, 12)


@pytest.mark.parametrize("g", [TorusGrid(1, 1024, 100.0), TorusGrid(2, 128, 30.0)])
def test_partition_of_unity(g):
    assert build_partition(g).unity_residual() < 1e-10


def test_block_supports_are_annuli(part, grid):
    kabs = grid.abs_wavenumber
    for j in part.js:
        block = part.blocks[part.index(j)]
        outside = (kabs <= 2.0 ** (j - 1)) | (kabs >= 2.0 ** (j + 1))
        assert np.all(block[outside] == 0.0)
        assert np.all(block >= 0.0)
    with pytest.raises(IndexError):
        part.index(part.j_max + 1)


def test_low_block_keeps_the_mean(grid, part):
    f = grid.constant(2.5)
    np.testing.assert_allclose(low_block(f, part).samples, 2.5, atol=1e-13)
    assert np.all(block_norms(f, math.inf, part) < 1e-13)


def test_single_mode_norm(grid, part):
    # a pure cosine at k = 2^j lies entirely in shell j
    n = 64
    k = 2 * np.pi * n / grid.period
    j = int(round(math.log2(k)))
    assert 2.0**j == pytest.approx(k, rel=0.5)
    f = grid.sample(lambda x: np.cos(k * x))
    norms = block_norms(f, math.inf, part)
    total = besov_norm(f, BesovSpec(1.0, math.inf, 1.0), part)
    assert norms.sum() == pytest.approx(1.0, abs=1e-12)
    blocks = sum(dyadic_block(f, int(jj), part).samples for jj in part.js)
    np.testing.assert_allclose(blocks, f.samples, atol=1e-12)
    assert total == pytest.approx(float((2.0**part.js * norms).sum()), rel=1e-14)


def test_inhomogeneous_adds_low_block(grid, part):
    # every mode sits below |k| = 1, so only the low block contributes: max |1 + cos| = 2
    f = grid.sample(lambda x: 1.0 + np.cos(2 * np.pi * 3 * x / grid.period))
    inh = besov_norm(f, BesovSpec(1.0, math.inf, 1.0, homogeneous=False), part)
    assert inh == pytest.approx(2.0, rel=1e-12)
    assert besov_norm(f, BesovSpec(1.0, math.inf, 1.0), part) > 0


def test_spec_validation():
    with pytest.raises(ValueError):
        BesovSpec(1.0, q=0.5)
    with pytest.raises(ValueError):
        BesovSpec(1.0, sigma=0.0)


@pytest.mark.parametrize("q", [1.0, 2.0, math.inf])
def test_zero_smoothness_norm_dominates_lq(grid, part, q):
    for f in _corpus(grid, part, 5, seed=11):
        assert besov_norm(f, BesovSpec(0.0, q, 1.0), part) >= lq_norm(f, q) - 1e-10


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_l1_interpolation(grid, part, eps):
    # Holder over shells: 2^j a_j = (2^{j eps} a_j)^eps (2^{j(1+eps)} a_j)^{1-eps}
    for f in _corpus(grid, part, 5, seed=12):
        b1 = besov_norm(f, BesovSpec(1.0, math.inf, 1.0), part)
        lo = besov_norm(f, BesovSpec(eps, math.inf, 1.0), part)
        hi = besov_norm(f, BesovSpec(1.0 + eps, math.inf, 1.0), part)
        assert b1 <= lo**eps * hi ** (1 - eps) * (1 + 1e-10)


def test_interpolation_ratio_is_bounded(grid, part):
    ratios = [interpolation_ratio(f, 1.0, 0.5, 0.5, math.inf, part) for f in _corpus(grid, part, 6, seed=13)]
    assert all(0 < r < 10 for r in ratios)
    assert math.isnan(interpolation_ratio(grid.zeros(), 1.0, 0.5, 0.5, math.inf, part))


def test_nonlinear_estimate_ratio(grid, part):
    for f in _corpus(grid, part, 4, seed=14):
        r = nonlinear_estimate_ratio(f, 2.0, 1.0, math.inf, part)
        assert 0 < r < 20
    with pytest.raises(ValueError):
        nonlinear_estimate_ratio(grid.zeros(), 1.5, 1.6, math.inf, part)


@pytest.mark.parametrize(
    "s,q,order,expected",
    [(1.0, math.inf, 2, 0.3034342122374407), (0.5, 2.0, 1, 0.23097023467547645)],
)
def test_difference_norm_single_mode_regression(grid, part, s, q, order, expected):
    f = grid.sample(lambda x: np.cos(2 * np.pi * 40 * x / grid.period))
    ratio = besov_norm(f, BesovSpec(s, q, 1.0), part) / besov_norm_differences(f, s, q, 1.0, order)
    assert ratio == pytest.approx(expected, rel=1e-9)


def test_difference_norm_2d_single_mode():
    g = TorusGrid(2, 64, 2 * np.pi * 4)
    f = g.sample(lambda x, y: np.cos(2 * x + y))
    ratio = besov_norm(f, BesovSpec(1.0, math.inf, 1.0)) / besov_norm_differences(f, 1.0, math.inf, 1.0)
    assert 0.1 < ratio < 10


def test_difference_norm_validation(grid):
    with pytest.raises(ValueError):
        besov_norm_differences(grid.zeros(), 2.0, math.inf, 1.0, order=2)


def test_pointwise_identity_tuples_give_zero():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, 1000))
    for p in (1.5, 2.0, 3.0):
        lhs, _ = pointwise_inequality_sides(p, a, b, a, b)
        assert np.all(lhs == 0)


@settings(max_examples=200, deadline=None)
@given(
    p=st.sampled_from([1.5, 2.0, 3.0]),
    vals=st.tuples(*[st.floats(-10, 10, allow_nan=False)] * 4),
)
def test_pointwise_inequality_bounded(p, vals):
    assert pointwise_inequality_check(p, [vals]) <= 10.0


def test_as_printed_variant_is_unbounded():
    # A, C, D -> 0 with B fixed: LHS ~ |B|^p while the printed RHS vanishes
    eps = 1e-4
    ratio = pointwise_inequality_check(3.0, [(eps, 1.0, 0.0, eps)], variant="as_printed")
    assert ratio > 1e3
    assert pointwise_inequality_check(3.0, [(eps, 1.0, 0.0, eps)], variant="symmetric") < 10


def test_pointwise_validation():
    with pytest.raises(ValueError):
        pointwise_inequality_sides(2.0, 1, 2, 3, 4, variant="other")
    with pytest.raises(ValueError):
        pointwise_inequality_check(1.0, [(1, 2, 3, 4)])


def test_dilate_identity_and_exact_scaling():
    g = TorusGrid(1, 1024, 200.0)
    u = g.sample(lambda x: np.exp(-((x / 8) ** 2)))
    assert dilate(u, 1.0) is u
    out = dilate(u, 2.0)
    np.testing.assert_allclose(out.samples, np.exp(-((2 * g.axis / 8) ** 2)) / 2, atol=1e-10)


def test_dilate_detects_aliasing():
    g = TorusGrid(1, 1024, 100.0)
    u = preset_initial_data("bump", g, 0.01, radius=1.0)
    with pytest.raises(AliasingError):
        dilate(u, 4.0)
    with pytest.raises(ValueError):
        dilate(u, -1.0)


def test_scaling_check_unit_lambda_is_exact():
    g = TorusGrid(1, 1024, 100.0)
    u = preset_initial_data("bump", g, 0.01, radius=8.0)
    assert scaling_check(u, 1.0) == 1.0


def test_dilate_2d():
    g = TorusGrid(2, 256, 60.0)
    u = g.sample(lambda x, y: np.exp(-(x**2 + y**2) / 16))
    out = dilate(u, 2.0)
    x, y = g.coords
    np.testing.assert_allclose(out.samples, np.exp(-4 * (x**2 + y**2) / 16) / 2, atol=1e-9)
