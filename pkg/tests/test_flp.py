import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsvar.flp import (
    FlpFit,
    RankDeficientError,
    default_lag_truncation,
    flp_fit,
    flp_fit_horizons,
    flp_functional_irf,
    flp_score_irf,
    hac_cov,
)
from fsvar.fpca import FpcaModel
from fsvar.lqd import LqdCurve, unit_grid


def linear_model(n_z=800, k=1):
    z = unit_grid(n_z)
    cols = np.column_stack([z ** (j + 1) for j in range(k)])
    cols /= np.linalg.norm(cols, axis=0)
    return FpcaModel(LqdCurve(z, np.zeros(n_z), 1.0), cols, np.zeros((2, k)), np.ones(k), np.full(k, 1 / k))


def test_identity_regression():
    x = np.random.default_rng(0).normal(size=(200, 1))
    fit = flp_fit(x, 0, [0], p=0, h=0)
    assert fit.regressors == ["const", "z0[t]"]
    assert fit.beta[0] == pytest.approx(1.0, abs=1e-12)


def test_static_triangular_oracle():
    rng = np.random.default_rng(1)
    a0inv = np.array([[0.8, 0.0, 0.0], [0.5, 0.6, 0.0], [-0.3, 0.2, 0.4]])
    z = rng.standard_normal((20_000, 3)) @ a0inv.T
    fit = flp_fit(z, 0, [1, 2], p=0, h=0)
    irf, se = flp_score_irf([fit])
    assert np.all(np.abs(irf[0] - a0inv[1:, 0]) < 4 * se[0] + 1e-3)


def test_design_layout_and_controls():
    z = np.random.default_rng(2).normal(size=(100, 4))
    fit = flp_fit(z, 3, [1, 2], p=2, h=1, names=list("abcd"))
    assert fit.regressors[:5] == ["const", "a[t]", "b[t]", "c[t]", "d[t]"]
    assert fit.regressors[5:9] == ["a[t-1]", "b[t-1]", "c[t-1]", "d[t-1]"]
    assert fit.X.shape == (100 - 2 - 1, 1 + 4 + 8)
    assert fit.impulse_row == 4


def test_residual_means_are_zero():
    z = np.random.default_rng(3).normal(size=(300, 3)) + 5.0
    fit = flp_fit(z, 0, [1, 2], p=1, h=3)
    np.testing.assert_allclose(fit.residuals.mean(axis=0), 0.0, atol=1e-8)


def test_impulse_sd_oracle():
    rng = np.random.default_rng(4)
    z = rng.normal(size=(500, 3))
    z[:, 2] += 0.5 * z[:, 0]
    fit = flp_fit(z, 2, [1], p=1, h=0, controls=[0])
    others = np.delete(fit.X, fit.impulse_row, axis=1)
    u = fit.X[:, fit.impulse_row] - others @ np.linalg.lstsq(others, fit.X[:, fit.impulse_row], rcond=None)[0]
    assert fit.impulse_sd == pytest.approx(np.sqrt(u @ u / (u.size - others.shape[1])))


def test_rank_deficiency_names_columns():
    z = np.random.default_rng(5).normal(size=(100, 3))
    z[:, 1] = 2 * z[:, 0]
    with pytest.raises(RankDeficientError, match=r"z0\[t\]|z1\[t\]"):
        flp_fit(z, 2, [1], p=0, h=0, controls=[0, 1])


def test_too_short_sample():
    z = np.random.default_rng(6).normal(size=(12, 3))
    with pytest.raises(ValueError, match="smaller than"):
        flp_fit(z, 0, [1], p=3, h=2)


# --- HAC ---------------------------------------------------------------------

def test_zero_lag_is_white_system_covariance():
    rng = np.random.default_rng(7)
    z = rng.normal(size=(400, 3)) * np.linspace(1, 2, 400)[:, None]
    fit = flp_fit(z, 0, [1, 2], p=1, h=0, lag_truncation=0)
    X, E = fit.X, fit.residuals
    inv = np.linalg.inv(X.T @ X)
    m = X.shape[1]
    for i in range(2):
        for j in range(2):
            meat = (X * (E[:, i] * E[:, j])[:, None]).T @ X
            block = fit.cov[i * m:(i + 1) * m, j * m:(j + 1) * m]
            np.testing.assert_allclose(block, inv @ meat @ inv, rtol=1e-10, atol=1e-14)


def test_ma1_residuals_raise_variance():
    rng = np.random.default_rng(8)
    t = 4000
    x = np.convolve(rng.normal(size=t + 1), [1.0, 0.9], mode="valid")
    e = np.convolve(rng.normal(size=t + 1), [1.0, 0.9], mode="valid")
    z = np.column_stack([x, 0.5 * x + e])
    fit = flp_fit(z, 0, [1], p=0, h=0)
    v0 = hac_cov(fit, 0)[1, 1]
    v1 = hac_cov(fit, 1)[1, 1]
    assert v1 > 1.2 * v0


def test_newey_west_drops_cross_equation_blocks():
    z = np.random.default_rng(9).normal(size=(300, 3))
    fit = flp_fit(z, 0, [1, 2], p=1, h=2)
    dk = hac_cov(fit, 4, "driscoll-kraay")
    nw = hac_cov(fit, 4, "newey-west")
    m = fit.X.shape[1]
    np.testing.assert_allclose(nw[:m, :m], dk[:m, :m])
    assert np.all(nw[:m, m:] == 0)


def test_hac_argument_errors():
    fit = flp_fit(np.random.default_rng(10).normal(size=(50, 2)), 0, [1], p=0, h=0)
    with pytest.raises(ValueError, match="smaller than T"):
        hac_cov(fit, 50)
    with pytest.raises(ValueError):
        hac_cov(fit, -1)
    with pytest.raises(ValueError, match="unknown HAC"):
        hac_cov(fit, 1, "bartlett")
    assert default_lag_truncation(100) == 13


@given(seed=st.integers(0, 10_000), lags=st.integers(0, 12), h=st.integers(0, 4),
       method=st.sampled_from(["driscoll-kraay", "newey-west"]))
def test_hac_is_symmetric_psd(seed, lags, h, method):
    rng = np.random.default_rng(seed)
    z = np.cumsum(rng.normal(size=(120, 3)), axis=0) * 0.1 + rng.normal(size=(120, 3))
    fit = flp_fit(z, 0, [1, 2], p=1, h=h, lag_truncation=lags, method=method)
    cov = fit.cov
    assert np.array_equal(cov, cov.T)
    eig = np.linalg.eigvalsh(cov)
    assert eig.min() >= -1e-10 * max(eig.max(), 1e-300)


# --- functional map ----------------------------------------------------------

def fixed_fit(beta, cov, impulse_sd=1.0, h=0):
    k = len(beta)
    coef = np.zeros((2, k))
    coef[1] = beta
    full = np.zeros((2 * k, 2 * k))
    idx = np.arange(k) * 2 + 1
    full[np.ix_(idx, idx)] = cov
    return FlpFit(h, coef, ["const", "u[t]"], np.zeros((1, 2)), np.zeros((1, k)), 1, impulse_sd, full)


def test_zero_beta_gives_zero_delta():
    model = linear_model(k=2)
    dirf = flp_functional_irf([fixed_fit([0.0, 0.0], np.zeros((2, 2)))], model, (0.0, 3.0), n_sim=5)
    assert np.all(dirf.point == 0) and np.all(dirf.deltas == 0)
    assert dirf.method == "flp"


def test_linear_basis_point_response_is_analytic():
    model = linear_model(1000)
    upper, beta, sd = 4.0, 1.7, 0.6
    dirf = flp_functional_irf([fixed_fit([beta], np.eye(1) * 1e-4, sd)], model, (0.0, upper), n_sim=20)
    b = sd * beta / np.linalg.norm(unit_grid(1000))
    k = (np.exp(b) - 1) / upper
    shocked = k / (b * (1 + k * dirf.grid))
    np.testing.assert_allclose(dirf.baselines[0], 1 / upper, atol=1e-9)
    np.testing.assert_allclose(dirf.point[0], shocked - 1 / upper, atol=2e-4)


def test_flp_deltas_integrate_to_zero():
    rng = np.random.default_rng(11)
    z = rng.normal(size=(400, 3))
    z[1:, 1] += 0.4 * z[:-1, 0]
    fits = flp_fit_horizons(z, 0, [1, 2], 1, [0, 1, 2])
    dirf = flp_functional_irf(fits, linear_model(k=2), (0.0, 2.0), n_sim=50, seed=3)
    assert np.max(np.abs(np.trapezoid(dirf.deltas, dirf.grid, axis=-1))) < 1e-6
    assert np.max(np.abs(np.trapezoid(dirf.point, dirf.grid, axis=-1))) < 1e-6
    again = flp_functional_irf(fits, linear_model(k=2), (0.0, 2.0), n_sim=50, seed=3)
    assert np.array_equal(dirf.deltas, again.deltas)


def test_functional_map_checks_dimensions():
    with pytest.raises(ValueError, match="K=2"):
        flp_functional_irf([fixed_fit([0.0], np.zeros((1, 1)))], linear_model(k=2), (0, 1))
    with pytest.raises(ValueError, match="no fitted"):
        flp_functional_irf([], linear_model(), (0, 1))
