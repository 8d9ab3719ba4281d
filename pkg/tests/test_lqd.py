import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import mise
from fsvar.density import DensityCurve, count_renormalizations, estimate_density, uniform_grid
from fsvar.lqd import (
    LqdCurve,
    LqdOverflowError,
    lqd_forward,
    lqd_inverse,
    lqd_quantile,
    read_lqd_json,
    unit_grid,
    write_lqd_json,
)


def beta_curve(a, b, support, n=1000):
    lo, hi = support
    grid = uniform_grid(support, n)
    v = stats.beta.pdf((grid - lo) / (hi - lo), a, b) / (hi - lo)
    return DensityCurve(grid, v / np.trapezoid(v, grid))


# --- forward -----------------------------------------------------------------

def test_uniform_unit_has_zero_lqd():
    p = DensityCurve(uniform_grid((0, 1), 500), np.ones(500))
    np.testing.assert_allclose(lqd_forward(p).values, 0.0, atol=1e-9)


@pytest.mark.parametrize("c", [0.5, 2.0, 5.0])
def test_uniform_scaled_has_log_c(c):
    p = DensityCurve(uniform_grid((0, c), 500), np.full(500, 1 / c))
    f = lqd_forward(p)
    np.testing.assert_allclose(f.values, np.log(c), atol=1e-9)
    assert f.support_sup == c


def test_censored_gamma_shape():
    grid = uniform_grid((0.0, 5.0), 1000)
    v = stats.gamma.pdf(grid, 2.0)
    p = DensityCurve(grid, v / np.trapezoid(v, grid))
    f = lqd_forward(p)
    assert np.all(np.isfinite(f.values))
    # steep rise toward the upper quantiles, where the density thins out
    tail = f.values[f.grid01 > 0.9]
    assert np.all(np.diff(tail) > 0)
    assert f.values[-1] - f.values[500] > 1.5


def test_forward_rejects_corrupted_curve():
    grid = uniform_grid((0, 1), 100)
    with pytest.raises(ValueError, match="strictly increasing"):
        lqd_forward(DensityCurve(grid, np.full(100, np.nan)))


# --- inverse -----------------------------------------------------------------

def test_zero_lqd_gives_uniform():
    f = LqdCurve(unit_grid(1000), np.zeros(1000), 5.0)
    np.testing.assert_allclose(lqd_quantile(f, (0, 5)), 5 * f.grid01, atol=1e-12)
    p = lqd_inverse(f, (0.0, 5.0))
    np.testing.assert_allclose(p.values, 0.2, atol=1e-9)


def test_log5_lqd_gives_same_uniform():
    f = LqdCurve(unit_grid(1000), np.full(1000, np.log(5.0)), 5.0)
    np.testing.assert_allclose(lqd_inverse(f, (0.0, 5.0)).values, 0.2, atol=1e-9)


def test_support_with_positive_lower_bound():
    f = LqdCurve(unit_grid(200), np.zeros(200), 7.0)
    q = lqd_quantile(f, (2.0, 7.0))
    assert q[0] == 2.0 and q[-1] == 7.0
    np.testing.assert_allclose(lqd_inverse(f, (2.0, 7.0)).values, 0.2, atol=1e-9)


def test_overflow_is_reported():
    v = np.zeros(100)
    v[3] = 1500.0
    with pytest.raises(LqdOverflowError, match="LQD overflow"):
        lqd_inverse(LqdCurve(unit_grid(100), v, 1.0), (0, 1))
    v[3] = np.inf
    with pytest.raises(LqdOverflowError, match="LQD overflow"):
        lqd_inverse(LqdCurve(unit_grid(100), v, 1.0), (0, 1))


def test_large_but_finite_values_survive():
    z = unit_grid(500)
    f = LqdCurve(z, 650.0 + np.sin(6 * z), 1.0)
    p = lqd_inverse(f, (0.0, 1.0))
    assert abs(p.integral() - 1) < 1e-8


def test_lqd_grid_must_span_unit_interval():
    with pytest.raises(ValueError):
        LqdCurve(np.linspace(0.1, 1, 10), np.zeros(10), 1.0)


# --- round trip --------------------------------------------------------------

def test_roundtrip_smooth_beta_example():
    p = beta_curve(2.0, 2.0, (0.0, 1.0))
    back = lqd_inverse(lqd_forward(p), p.support)
    assert mise(back.values, p.values, p.grid) < 1e-6


@pytest.mark.parametrize("a,b", [(2, 2), (3, 3), (2, 5), (5, 2), (3, 6)])
def test_roundtrip_beta_shapes_on_wide_support(a, b):
    p = beta_curve(a, b, (0.0, 6.0))
    back = lqd_inverse(lqd_forward(p), p.support)
    assert mise(back.values, p.values, p.grid) < 1e-5


@pytest.mark.parametrize("a,b", [(2, 2), (2, 5)])
def test_roundtrip_beta_shapes_on_unit_support(a, b):
    p = beta_curve(a, b, (0.0, 1.0))
    back = lqd_inverse(lqd_forward(p), p.support)
    assert mise(back.values, p.values, p.grid) < 1e-5


@given(
    seed=st.integers(0, 2**32 - 1),
    shape=st.floats(1.2, 6.0),
    lo=st.floats(-3, 3),
    width=st.floats(1.0, 10.0),
    n=st.sampled_from([500, 1000]),
)
def test_roundtrip_kde_curves(seed, shape, lo, width, n):
    rng = np.random.default_rng(seed)
    x = lo + width * rng.beta(shape, 2.0, 2000)
    p = estimate_density(x, (lo, lo + width), n_grid=n)
    back = lqd_inverse(lqd_forward(p, n), p.support)
    assert mise(back.values, p.values, p.grid) < 1e-5


@given(
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(0.1, 5.0),
    shift=st.floats(-50, 50),
    n=st.sampled_from([64, 300, 1000]),
)
def test_inverse_is_valid_density_without_rescaling(seed, scale, shift, n):
    rng = np.random.default_rng(seed)
    z = unit_grid(n)
    coef = rng.normal(size=5) * scale
    values = shift + sum(c * np.cos(np.pi * (j + 1) * z) for j, c in enumerate(coef))
    with count_renormalizations() as box:
        p = lqd_inverse(LqdCurve(z, values, 3.0), (0.0, 3.0))
    assert box["calls"] == 0
    assert np.all(p.values >= 0)
    assert abs(p.integral() - 1.0) < 1e-8


@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-30, 30))
def test_additive_constant_invariance(seed, c):
    rng = np.random.default_rng(seed)
    z = unit_grid(400)
    f = LqdCurve(z, rng.normal(size=3) @ np.vstack([z, z**2, np.sin(3 * z)]), 2.0)
    a = lqd_inverse(f, (0.0, 2.0)).values
    b = lqd_inverse(f + c, (0.0, 2.0)).values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_location_is_supplied_by_caller():
    p = beta_curve(2.0, 3.0, (0.0, 4.0))
    f = lqd_forward(p)
    moved = lqd_inverse(f, (10.0, 14.0))
    np.testing.assert_allclose(moved.grid, p.grid + 10.0, atol=1e-12)
    assert mise(moved.values, p.values, p.grid) < 1e-5


def test_json_and_csv_roundtrip_bit_exact(tmp_path):
    f = lqd_forward(beta_curve(2.5, 3.0, (0.0, 6.0)))
    write_lqd_json(f, tmp_path / "f.json")
    g = read_lqd_json(tmp_path / "f.json")
    np.testing.assert_array_equal(g.grid01, f.grid01)
    np.testing.assert_array_equal(g.values, f.values)
    f.to_csv(tmp_path / "f.csv")
    h = LqdCurve.from_csv(tmp_path / "f.csv", f.support_sup)
    np.testing.assert_array_equal(h.values, f.values)
