import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphcov.geometry import Field, build_grid
from sphcov.meanfield import MeanModel, RankDeficiencyError, fit_mean, sh_basis, sh_columns

GRID = build_grid(30, 48, -80, 80)


def test_column_counts_and_order():
    assert sh_basis(GRID, 0).shape == (30 * 48, 1)
    assert sh_basis(GRID, 12).shape[1] == 169
    assert sh_columns(2) == [(0, 0, "zonal"), (1, 0, "zonal"), (1, 1, "cos"), (1, 1, "sin"),
                             (2, 0, "zonal"), (2, 1, "cos"), (2, 1, "sin"), (2, 2, "cos"),
                             (2, 2, "sin")]


def test_degree_one_closed_form():
    X = sh_basis(GRID, 1)
    LL, ll = np.meshgrid(np.radians(GRID.lats), np.radians(GRID.lons), indexing="ij")
    L, l = LL.ravel(), ll.ravel()
    c0 = 1 / np.sqrt(4 * np.pi)
    c1 = np.sqrt(3 / (4 * np.pi))
    assert np.allclose(X[:, 0], c0)
    assert np.allclose(X[:, 1], c1 * np.sin(L))
    assert np.allclose(X[:, 2], c1 * np.cos(L) * np.cos(l))
    assert np.allclose(X[:, 3], c1 * np.cos(L) * np.sin(l))


def test_orthonormal_on_sphere():
    # Gauss-Legendre in sin(latitude) integrates the products exactly
    from sphcov.meanfield import _basis_at
    x, w = np.polynomial.legendre.leggauss(16)
    lons = np.arange(40) * 360.0 / 40
    LL, ll = np.meshgrid(np.degrees(np.arcsin(x)), lons, indexing="ij")
    X = _basis_at(LL.ravel(), ll.ravel(), 6)
    wt = np.repeat(w, 40) * (2 * np.pi / 40)
    G = (X * wt[:, None]).T @ X
    assert np.allclose(G, np.eye(49), atol=1e-12)


def test_constant_field():
    f = Field(GRID, np.full(GRID.shape, 3.5))
    model, fitted, resid = fit_mean(f, 4)
    assert np.allclose(model.coeffs[1:], 0, atol=1e-12)
    assert model.coeffs[0] == pytest.approx(3.5 * np.sqrt(4 * np.pi))
    assert np.allclose(resid.values, 0, atol=1e-12)


def test_degree_two_recovery():
    rng = np.random.default_rng(0)
    c = rng.standard_normal(9)
    X = sh_basis(GRID, 2)
    f = Field(GRID, (X @ c).reshape(GRID.shape))
    model, fitted, resid = fit_mean(f, 2)
    assert np.allclose(model.coeffs, c, atol=1e-8)
    assert np.abs(resid.values).max() <= 1e-8
    assert model.evaluate(GRID) == fitted


def test_orthogonality_and_linearity():
    rng = np.random.default_rng(1)
    X = sh_basis(GRID, 5)
    y = X @ rng.standard_normal(36) + rng.standard_normal(X.shape[0])
    model, fitted, resid = fit_mean(Field(GRID, y.reshape(GRID.shape)), 5)
    r = resid.vector_lon_fastest()
    assert np.abs(X.T @ r).max() <= 1e-8 * np.linalg.norm(X, axis=0).max() * np.linalg.norm(y)
    assert abs(r.mean()) <= 1e-9 * np.abs(y).max()
    y2 = y + 2.5 * X[:, 7]
    m2, _, _ = fit_mean(Field(GRID, y2.reshape(GRID.shape)), 5)
    delta = m2.coeffs - model.coeffs
    assert delta[7] == pytest.approx(2.5, abs=1e-9)
    assert np.abs(np.delete(delta, 7)).max() <= 1e-9


def test_area_weighted_flag_changes_fit():
    rng = np.random.default_rng(2)
    f = Field(GRID, rng.standard_normal(GRID.shape))
    a, _, _ = fit_mean(f, 3)
    b, _, _ = fit_mean(f, 3, area_weighted=True)
    assert not np.allclose(a.coeffs, b.coeffs)


def test_rank_deficiency_reported():
    g = build_grid(3, 4, -10, 10)
    # four longitudes cannot separate cos(2l) from sin(2l) harmonics at order 2+
    with pytest.raises(RankDeficiencyError) as info:
        fit_mean(Field(build_grid(6, 4, -40, 40), np.zeros((6, 4))), 3)
    assert info.value.columns
    with pytest.raises(ValueError):
        fit_mean(Field(g, np.zeros(g.shape)), 5)


def test_mean_model_validation():
    with pytest.raises(ValueError):
        MeanModel(2, np.zeros(8))
