import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphcov.covmodel import MODEL_CATALOG, ModelSpec, ParamVector, cov_eval, random_params
from sphcov.errors import IndefiniteBlockError
from sphcov.geometry import Field, build_grid
from sphcov.spectral import (CrossCovTensor, MissingDataError, cross_cov_tensor,
                             dense_covariance, gaussian_loglik_dense, loglik_dense, loglik_fft,
                             simulate_grid, spectral_blocks)

A = ModelSpec.from_letter("A")


def nugget_only(eps=0.7):
    return ParamVector(alpha=1e-14, beta=100.0, nu=1.0, eps=eps)


def test_tensor_matches_cov_eval_and_symmetry():
    rng = np.random.default_rng(0)
    for letter in MODEL_CATALOG:
        spec = ModelSpec.from_letter(letter)
        p = random_params(spec, rng)
        g = build_grid(3, 4, -40, 50)
        c = cross_cov_tensor(spec, p, g).c
        n = g.n
        for i in range(3):
            for j in range(3):
                for k in range(n):
                    ref = cov_eval(spec, p, g.lats[i], g.lats[j], k * g.dlon,
                                   nugget=False) + p.eps * (i == j and k == 0)
                    assert c[i, j, k] == pytest.approx(ref, rel=1e-12, abs=1e-12)
                    assert c[i, j, k] == c[j, i, (n - k) % n]


def test_tensor_nugget_only():
    g = build_grid(4, 6, -30, 30)
    c = cross_cov_tensor(A, nugget_only(0.7), g).c
    expect = np.zeros_like(c)
    expect[np.arange(4), np.arange(4), 0] = 0.7
    assert np.allclose(c, expect, atol=1e-12)


def test_tensor_isotropy_model_a():
    p = random_params(A, np.random.default_rng(4)).with_values(A, {"eps": 0.0})
    g = build_grid(4, 8, -60, 60)
    c = cross_cov_tensor(A, p, g).c
    from sphcov.covmodel import matern_cov
    from sphcov.geometry import chordal_distance
    L = g.lats
    ch = chordal_distance(L[:, None, None], L[None, :, None],
                          g.dlon * np.arange(8)[None, None, :])
    assert np.allclose(c, matern_cov(ch, p.base), rtol=1e-13)


def test_blocks_dft_properties():
    g = build_grid(3, 6, -30, 30)
    const = CrossCovTensor(g, np.broadcast_to(np.eye(3)[:, :, None] * 2.0 + 0.5, (3, 3, 6)).copy())
    M = spectral_blocks(const).blocks
    assert np.allclose(M[0], 6 * (np.eye(3) * 2.0 + 0.5))
    assert np.allclose(M[1:], 0)
    p = random_params(ModelSpec.from_letter("H"), np.random.default_rng(1))
    t = cross_cov_tensor(ModelSpec.from_letter("H"), p, build_grid(4, 7, -50, 50))
    blocks = spectral_blocks(t).blocks
    assert np.allclose(blocks[0], t.c.sum(axis=2))
    back = np.fft.ifft(np.moveaxis(blocks, 0, 2), axis=2).real
    assert np.allclose(back, t.c, atol=1e-12 * np.abs(t.c).max())
    for r in range(1, 7):
        assert np.array_equal(blocks[7 - r], np.conj(blocks[r]))
        assert np.allclose(blocks[r], blocks[r].conj().T)
        assert np.linalg.eigvalsh(blocks[r])[0] > -1e-8 * np.trace(blocks[r]).real
    assert np.all(blocks[0].imag == 0)


@pytest.mark.parametrize("letter", sorted(MODEL_CATALOG))
@pytest.mark.parametrize("shape", [(3, 4), (5, 8), (4, 7)])
def test_fft_equals_dense(letter, shape):
    rng = np.random.default_rng([ord(letter), *shape])
    spec = ModelSpec.from_letter(letter)
    g = build_grid(*shape, -65, 65)
    for _ in range(2):
        p = random_params(spec, rng)
        f = Field(g, rng.standard_normal(shape) * 3)
        a, b = loglik_fft(f, spec, p), loglik_dense(f, spec, p)
        assert abs(a - b) <= 1e-8 * abs(b)
        assert loglik_dense(f, spec, p, order="lon_fastest") == pytest.approx(b, rel=1e-12)


def test_nugget_only_closed_form():
    rng = np.random.default_rng(2)
    g = build_grid(5, 8, -20, 20)
    z = rng.standard_normal((5, 8))
    eps = 0.7
    ref = -0.5 * 40 * np.log(2 * np.pi * eps) - 0.5 / eps * np.sum(z ** 2)
    assert loglik_fft(Field(g, z), A, nugget_only(eps)) == pytest.approx(ref, rel=1e-10)


def test_zero_field_is_log_determinant():
    p = random_params(A, np.random.default_rng(3))
    g = build_grid(4, 6, -40, 40)
    C = dense_covariance(A, p, g)
    ref = -0.5 * np.linalg.slogdet(C)[1] - 12 * np.log(2 * np.pi)
    assert loglik_fft(Field(g, np.zeros((4, 6))), A, p) == pytest.approx(ref, rel=1e-12)


def test_dense_scalar_case():
    v, z = 2.5, 1.3
    assert gaussian_loglik_dense([z], [[v]]) == pytest.approx(-0.5 * (np.log(2 * np.pi * v) + z * z / v))


def test_dense_cap_and_missing():
    g = build_grid(70, 64, -40, 40)
    with pytest.raises(ValueError):
        loglik_dense(Field(g, np.zeros((70, 64))), A, nugget_only())
    v = np.zeros((3, 4))
    v[0, 0] = np.nan
    with pytest.raises(MissingDataError):
        loglik_fft(Field(build_grid(3, 4, -10, 10), v), A, nugget_only())


def test_indefinite_block_names_frequency():
    g = build_grid(3, 8, -20, 20)
    t = cross_cov_tensor(A, nugget_only(1.0), g)
    c = t.c.copy()
    c[0, 0, :] += 2.0 * np.cos(2 * np.pi * 3 * np.arange(8) / 8) * -1.0
    bad = CrossCovTensor(g, c)
    blocks = spectral_blocks(bad)
    with pytest.raises(IndefiniteBlockError) as info:
        loglik_fft(Field(g, np.zeros((3, 8))), A, nugget_only(), blocks=blocks)
    assert info.value.frequency == 3


def test_shift_invariance():
    spec = ModelSpec.from_letter("H")
    p = random_params(spec, np.random.default_rng(8))
    g = build_grid(6, 10, -50, 50)
    f = simulate_grid(spec, p, g, seed=1)[0]
    base = loglik_fft(f, spec, p)
    for s in (1, 3, 7):
        shifted = Field(g, np.roll(f.values, s, axis=1))
        assert loglik_fft(shifted, spec, p) == pytest.approx(base, rel=1e-9)


def test_simulation_determinism():
    p = random_params(ModelSpec.from_letter("F"), np.random.default_rng(0))
    g = build_grid(3, 6, -30, 30)
    a = simulate_grid("F", p, g, seed=5, reps=2)
    b = simulate_grid("F", p, g, seed=5, reps=2)
    c = simulate_grid("F", p, g, seed=6, reps=2)
    assert a[0] == b[0] and a[1] == b[1]
    assert not np.array_equal(a[0].values, c[0].values)
    assert not np.array_equal(a[0].values, a[1].values)


def test_simulation_nugget_moments():
    g = build_grid(4, 9, -20, 20)
    fields = simulate_grid(A, nugget_only(0.5), g, seed=3, reps=400)
    z = np.stack([f.values for f in fields])
    assert z.mean() == pytest.approx(0.0, abs=4 * np.sqrt(0.5 / z.size))
    se = 0.5 * np.sqrt(2.0 / z.size)
    assert z.var() == pytest.approx(0.5, abs=4 * se)


@pytest.mark.parametrize("n", [5, 6])
def test_simulation_covariance(n):
    spec = ModelSpec.from_letter("F")
    p = random_params(spec, np.random.default_rng(9))
    g = build_grid(3, n, -40, 40)
    reps = 3000
    fields = simulate_grid(spec, p, g, seed=11, reps=reps)
    X = np.stack([f.vector_lat_fastest() for f in fields])
    S = X.T @ X / reps
    C = dense_covariance(spec, p, g)
    se = np.sqrt((C ** 2 + np.outer(np.diag(C), np.diag(C))) / reps)
    assert np.all(np.abs(S - C) <= 5 * se)
