import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphcov.covmodel import ModelSpec, ParamVector, cov_eval, random_params
from sphcov.diagnostics import (DIRECTIONS, PROFILE_KINDS, DirVariogramRow, ProfileCurve,
                                dir_variogram_table, empirical_dir_variogram,
                                empirical_profile, fitted_dir_variogram, fitted_profile)
from sphcov.geometry import Field, build_grid
from sphcov.spectral import dense_covariance, simulate_grid

A = ModelSpec.from_letter("A")
F = ModelSpec.from_letter("F")
HAND = np.array([[1.0, 2.0, 4.0, 7.0],
                 [0.0, 3.0, 1.0, 5.0],
                 [2.0, 2.0, 6.0, 1.0]])


@pytest.fixture
def hand():
    return Field(build_grid(3, 4, -30, 30), HAND)


def test_hand_profiles(hand):
    # values worked out by hand from the printed sums
    assert empirical_profile(hand, "var_by_lon").empirical[0] == pytest.approx(1.0, abs=1e-12)
    assert empirical_profile(hand, "var_by_lat").empirical[0] == pytest.approx(7.0, abs=1e-12)
    d1 = empirical_profile(hand, "lon_diff1").empirical
    assert d1[0] == pytest.approx(1.0, abs=1e-12)
    assert d1[1] == pytest.approx(31.0 / 3.0, abs=1e-12)
    d2 = empirical_profile(hand, "lon_diff2").empirical
    assert d2[0] == pytest.approx(0.0, abs=1e-12)
    assert d2[2] == pytest.approx(84.5, abs=1e-12)
    cd = empirical_profile(hand, "cross_diff")
    assert cd.axis.tolist() == hand.grid.lats[1:].tolist()
    assert cd.empirical[0] == pytest.approx(31.0 / 3.0, abs=1e-12)


def test_hand_variograms(hand):
    assert empirical_dir_variogram(hand, 1, "S") == pytest.approx(math.sqrt(15.0 / 4.0), abs=1e-12)
    assert empirical_dir_variogram(hand, 1, "SE") == pytest.approx(math.sqrt(41.0 / 3.0), abs=1e-12)
    # SW: Z(L1, l_j) - Z(L0, l_{j-1}) for j = 1..3 -> 3-1, 1-2, 5-4
    assert empirical_dir_variogram(hand, 1, "SW") == pytest.approx(math.sqrt(6.0 / 3.0), abs=1e-12)
    # N from row 1 is S from row 2 seen the other way round
    assert empirical_dir_variogram(hand, 1, "N") == pytest.approx(
        empirical_dir_variogram(hand, 2, "S"), abs=1e-12)
    assert empirical_dir_variogram(hand, 1, "E") == pytest.approx(
        math.sqrt(np.mean(np.diff(HAND[1]) ** 2)), abs=1e-12)


def test_boundary_errors(hand):
    with pytest.raises(ValueError):
        empirical_dir_variogram(hand, 0, "S")
    with pytest.raises(ValueError):
        empirical_dir_variogram(hand, 2, "NE")
    with pytest.raises(ValueError):
        empirical_dir_variogram(hand, 1, "UP")
    one_row = Field(build_grid(2, 4, -10, 10), HAND[:2])
    assert empirical_profile(one_row, "cross_diff").empirical.size == 1
    with pytest.raises(ValueError):
        empirical_profile(Field(hand.grid, np.where(HAND > 6, np.nan, HAND)), "var_by_lat")


def test_constant_field_is_zero():
    f = Field(build_grid(4, 6, -40, 40), np.full((4, 6), 3.25))
    for which in PROFILE_KINDS:
        assert np.all(empirical_profile(f, which).empirical == 0.0)
    for d in DIRECTIONS:
        assert empirical_dir_variogram(f, 1, d) == 0.0


def test_aligned_shift():
    rng = np.random.default_rng(0)
    row = rng.standard_normal(8)
    Z = np.vstack([row, np.roll(row, -1)])
    f = Field(build_grid(2, 8, -10, 10), Z)
    assert empirical_dir_variogram(f, 1, "SE") == 0.0
    assert empirical_dir_variogram(f, 1, "SW") > 0.1


def test_profile_curve_invariants():
    with pytest.raises(ValueError):
        ProfileCurve("var_by_lon", np.arange(3.0), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        ProfileCurve("lon_diff1", np.arange(3.0), np.zeros(2))
    with pytest.raises(ValueError):
        ProfileCurve("bogus", np.arange(3.0))
    assert fitted_profile(A, ParamVector(1.0, 500.0, 1.0, 0.1), build_grid(3, 4, -30, 30),
                          "var_by_lon").fitted is None


def test_nugget_only_fitted_values():
    g = build_grid(5, 8, -60, 60)
    p = ParamVector(alpha=1e-14, beta=100.0, nu=1.0, eps=0.7)
    np.testing.assert_allclose(fitted_profile(A, p, g, "var_by_lat").fitted, 0.7, rtol=1e-10)
    np.testing.assert_allclose(fitted_profile(A, p, g, "lon_diff1").fitted, 1.4, rtol=1e-10)
    np.testing.assert_allclose(fitted_profile(A, p, g, "lon_diff2").fitted, 4.2, rtol=1e-10)
    np.testing.assert_allclose(fitted_profile(A, p, g, "cross_diff").fitted, 2.8, rtol=1e-10)
    for d in DIRECTIONS:
        assert fitted_dir_variogram(A, p, g, 2, d) == pytest.approx(math.sqrt(1.4), rel=1e-10)


def test_model_a_var_by_lat_constant():
    p = ParamVector(alpha=2.0, beta=800.0, nu=1.3, eps=0.2)
    v = fitted_profile(A, p, build_grid(6, 10, -70, 70), "var_by_lat").fitted
    np.testing.assert_allclose(v, v[0], rtol=1e-12)
    assert v[0] == pytest.approx(2.0 * 2 ** 0.3 * math.gamma(1.3) + 0.2, rel=1e-12)


@pytest.mark.parametrize("letter", ["B", "D", "F", "H", "J"])
def test_fitted_profiles_match_covariance_identities(letter):
    spec = ModelSpec.from_letter(letter)
    p = random_params(spec, np.random.default_rng(3))
    g = build_grid(4, 9, -50, 50)
    dl = g.dlon

    def K(L1, L2, lag):
        return cov_eval(spec, p, L1, L2, lag)

    d1 = fitted_profile(spec, p, g, "lon_diff1").fitted
    d2 = fitted_profile(spec, p, g, "lon_diff2").fitted
    cd = fitted_profile(spec, p, g, "cross_diff").fitted
    for i, L in enumerate(g.lats):
        assert d1[i] == pytest.approx(2 * (K(L, L, 0) - K(L, L, dl)), rel=1e-10)
        assert d2[i] == pytest.approx(6 * K(L, L, 0) - 8 * K(L, L, dl) + 2 * K(L, L, 2 * dl),
                                      rel=1e-9)
    for i in range(1, g.m):
        L, M = g.lats[i], g.lats[i - 1]
        # Z(L, l+1) - Z(L, l) - Z(M, l+1) + Z(M, l), expanded term by term
        expect = (2 * K(L, L, 0) - 2 * K(L, L, dl) + 2 * K(M, M, 0) - 2 * K(M, M, dl)
                  - 4 * K(L, M, 0) + 2 * K(L, M, dl) + 2 * K(L, M, -dl))
        assert cd[i - 1] == pytest.approx(expect, rel=1e-9)


@pytest.mark.parametrize("letter", ["A", "B", "C"])
def test_reversible_models_give_symmetric_variograms(letter):
    spec = ModelSpec.from_letter(letter)
    g = build_grid(6, 12, -60, 60)
    for seed in range(3):
        p = random_params(spec, np.random.default_rng(seed))
        for i in range(1, g.m - 1):
            assert fitted_dir_variogram(spec, p, g, i, "NE") == fitted_dir_variogram(spec, p, g, i, "NW")
            assert fitted_dir_variogram(spec, p, g, i, "SE") == fitted_dir_variogram(spec, p, g, i, "SW")


def test_model_f_witness_breaks_symmetry():
    p = random_params(F, np.random.default_rng(11))
    g = build_grid(6, 12, -60, 60)
    diffs = [abs(fitted_dir_variogram(F, p, g, i, "NE") - fitted_dir_variogram(F, p, g, i, "NW"))
             for i in range(g.m - 1)]
    assert max(diffs) > 1e-6


@settings(max_examples=20, deadline=None)
@given(st.sampled_from("ABCDEFGHIJ"), st.integers(0, 10_000), st.integers(1, 4))
def test_fitted_values_nonnegative(letter, seed, i):
    spec = ModelSpec.from_letter(letter)
    p = random_params(spec, np.random.default_rng(seed))
    g = build_grid(6, 8, -70, 70)
    for d in DIRECTIONS:
        assert fitted_dir_variogram(spec, p, g, i, d) >= 0.0
    for which in ("var_by_lat", "lon_diff1", "lon_diff2", "cross_diff"):
        assert np.all(fitted_profile(spec, p, g, which).fitted >= 0.0)


def test_table_layout(hand):
    p = ParamVector(alpha=1.0, beta=900.0, nu=1.0, eps=0.1)
    rows = dir_variogram_table(hand, {"A": (A, p)}, 1)
    assert [r.direction for r in rows] == list(DIRECTIONS)
    assert all(isinstance(r, DirVariogramRow) and r.empirical >= 0 for r in rows)
    edge = dir_variogram_table(hand, {"A": (A, p)}, 0)
    assert {r.direction for r in edge} == {"W", "NW", "N", "NE", "E"}
    assert all(math.isnan(r.empirical) for r in dir_variogram_table(None, {"A": (A, p)}, 1, hand.grid))


def test_iid_var_by_lat_near_one():
    rng = np.random.default_rng(5)
    f = Field(build_grid(10, 400, -80, 80), rng.standard_normal((10, 400)))
    v = empirical_profile(f, "var_by_lat").empirical
    assert np.all(np.abs(v - 1.0) < 5 * math.sqrt(2.0 / 399))


def _expected_sample_variance(C, rows):
    """Exact mean of the ddof=1 sample variance of the linear combinations ``rows``."""
    k = rows.shape[0]
    centre = np.eye(k) - 1.0 / k
    return float(np.trace(centre @ rows @ C @ rows.T)) / (k - 1)


def _stencil_rows(which, i, grid):
    m, n = grid.shape
    rows = []
    js = range(1, n - 1) if which == "lon_diff2" else range(1, n)
    for j in js:
        w = np.zeros(m * n)
        if which == "lon_diff1":
            w[i * n + j] += 1
            w[i * n + j - 1] -= 1
        elif which == "lon_diff2":
            w[i * n + j + 1] += 1
            w[i * n + j] -= 2
            w[i * n + j - 1] += 1
        else:
            w[i * n + j] += 1
            w[i * n + j - 1] -= 1
            w[(i - 1) * n + j] -= 1
            w[(i - 1) * n + j - 1] += 1
        rows.append(w)
    return np.array(rows)


def test_monte_carlo_matches_exact_estimator_means():
    # long ranges: the estimators are biased against the population values, but their
    # exact expectations follow from the dense covariance
    p = random_params(F, np.random.default_rng(11))
    g = build_grid(5, 24, -50, 50)
    C = dense_covariance(F, p, g, order="lon_fastest")
    reps = simulate_grid(F, p, g, seed=9, reps=400)
    for which in ("lon_diff1", "lon_diff2", "cross_diff"):
        emp = np.array([empirical_profile(f, which).empirical for f in reps])
        lats = range(1, g.m) if which == "cross_diff" else range(g.m)
        exact = np.array([_expected_sample_variance(C, _stencil_rows(which, i, g)) for i in lats])
        se = emp.std(axis=0, ddof=1) / math.sqrt(len(reps))
        assert np.all(np.abs(emp.mean(axis=0) - exact) <= 4 * se)
    for d in ("S", "NE", "NW", "E"):
        sq = np.array([empirical_dir_variogram(f, 2, d) ** 2 for f in reps])
        fit = fitted_dir_variogram(F, p, g, 2, d) ** 2
        assert abs(sq.mean() - fit) <= 4 * sq.std(ddof=1) / math.sqrt(len(reps))
