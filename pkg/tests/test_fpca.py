import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsvar.fpca import (
    FpcaModel,
    LqdPanel,
    explained_variance,
    fit_fpca,
    project_matrix,
    project_scores,
    reconstruct,
    reconstruction_error,
    select_k_scree,
)
from fsvar.lqd import LqdCurve, unit_grid
from fsvar.pipeline import lqd_panel_from_samples
from fsvar.simlab import DgpSpec, simulate_dgp


def panel_from(matrix):
    z = unit_grid(matrix.shape[1])
    return LqdPanel.from_curves([LqdCurve(z, row, 1.0) for row in matrix])


def random_panel(seed, t=30, n_z=80):
    rng = np.random.default_rng(seed)
    return panel_from(rng.normal(size=(t, n_z)) @ np.diag(np.linspace(2, 0.1, n_z)))


def test_rank_one_panel():
    z = unit_grid(100)
    shape = np.sin(np.pi * z)
    matrix = np.outer(np.arange(10.0), shape) + 0.3
    panel = panel_from(matrix)
    model = fit_fpca(panel, 1)
    assert model.explained_shares[0] == pytest.approx(1.0, abs=1e-12)
    assert reconstruction_error(panel, model) < 1e-10
    assert select_k_scree(panel, 0.9) == 1


def test_full_rank_reconstruction_is_exact():
    panel = random_panel(1, t=50, n_z=20)
    model = fit_fpca(panel, 20)
    assert reconstruction_error(panel, model) < 1e-8
    assert select_k_scree(panel, 1.0) == 20


def test_full_variance_with_fewer_periods_than_points():
    # demeaning T rows leaves rank T - 1
    panel = random_panel(1, t=12, n_z=40)
    assert reconstruction_error(panel, fit_fpca(panel, 12)) < 1e-8
    assert select_k_scree(panel, 1.0) == 11


def test_k_out_of_range():
    panel = random_panel(2, t=5, n_z=20)
    for k in (0, 6):
        with pytest.raises(ValueError, match="outside"):
            fit_fpca(panel, k)


def test_demeaned_columns_sum_to_zero():
    panel = random_panel(3)
    np.testing.assert_allclose(panel.demeaned.sum(axis=0), 0.0, atol=1e-10)


def test_mixed_grids_rejected():
    a = LqdCurve(unit_grid(10), np.zeros(10), 1.0)
    b = LqdCurve(unit_grid(11), np.zeros(11), 1.0)
    with pytest.raises(ValueError, match="share one grid"):
        LqdPanel.from_curves([a, b])


@given(seed=st.integers(0, 10_000), k=st.integers(1, 10))
def test_model_invariants(seed, k):
    panel = random_panel(seed)
    model = fit_fpca(panel, k)
    np.testing.assert_allclose(model.basis.T @ model.basis, np.eye(k), atol=1e-8)
    shares = model.explained_shares
    assert np.all(np.diff(shares) <= 1e-15) and shares.sum() <= 1 + 1e-12
    # largest-magnitude loading of every basis vector is positive
    pivots = model.basis[np.argmax(np.abs(model.basis), axis=0), np.arange(k)]
    assert np.all(pivots > 0)
    # scores agree with the SVD factorization A = S V
    np.testing.assert_allclose(model.scores, panel.demeaned @ model.basis, atol=1e-9)


def test_explained_variance_oracle():
    panel = random_panel(4, t=15, n_z=30)
    s = np.linalg.svd(panel.demeaned, compute_uv=False)
    np.testing.assert_allclose(explained_variance(panel), s**2 / np.sum(s**2))
    cum = np.cumsum(explained_variance(panel))
    assert np.all(np.diff(cum) >= 0) and cum[-1] == pytest.approx(1.0)


def test_error_non_increasing_in_k():
    panel = random_panel(5)
    errors = [reconstruction_error(panel, fit_fpca(panel, k)) for k in range(1, 30)]
    assert np.all(np.diff(errors) <= 1e-10)


def test_projection_examples():
    panel = random_panel(6)
    model = fit_fpca(panel, 4)
    np.testing.assert_allclose(project_scores(model, model.mean_curve), 0.0, atol=1e-12)
    a = np.array([0.5, -1.0, 2.0, 0.25])
    np.testing.assert_allclose(project_scores(model, reconstruct(model, a)), a, atol=1e-10)
    np.testing.assert_allclose(reconstruct(model, np.zeros(4)).values, model.mean_curve.values)
    rows = np.vstack([reconstruct(model, a).values, reconstruct(model, 2 * a).values])
    np.testing.assert_allclose(project_matrix(model, rows), [a, 2 * a], atol=1e-10)


def test_projection_grid_mismatch():
    model = fit_fpca(random_panel(7), 2)
    with pytest.raises(ValueError, match="grid"):
        project_scores(model, LqdCurve(unit_grid(81), np.zeros(81), 1.0))
    with pytest.raises(ValueError):
        reconstruct(model, np.zeros(3))


@given(seed=st.integers(0, 10_000))
def test_idempotence(seed):
    model = fit_fpca(random_panel(seed % 50), 5)
    a = np.random.default_rng(seed).normal(size=5)
    np.testing.assert_allclose(project_scores(model, reconstruct(model, a)), a, atol=1e-10)


def test_json_roundtrip(tmp_path):
    model = fit_fpca(random_panel(8), 3)
    model.save(tmp_path / "m.json")
    back = FpcaModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.basis, model.basis)
    np.testing.assert_array_equal(back.scores, model.scores)
    np.testing.assert_array_equal(back.mean_curve.values, model.mean_curve.values)


def test_dgp1_noise_free_three_factors():
    spec = DgpSpec(t=200, n_obs=10)
    sim = simulate_dgp(spec, 0)
    rows = np.vstack([sim.basis.curve(a) for a in sim.alpha])
    model = fit_fpca(panel_from(rows), 3)
    assert model.explained_shares.sum() >= 0.99


def test_dgp1_scree_choice():
    spec = DgpSpec(t=120)
    sim = simulate_dgp(spec, 1)
    _, panel = lqd_panel_from_samples(sim.samples, spec.support, method="binned")
    assert 3 <= select_k_scree(panel, 0.9) <= 7
