"""Exact Gaussian likelihood and simulation on a full-circle grid via the DFT.

For an axially symmetric process on a regular grid the covariance of the
latitude-fastest stacked vector is block circulant in longitude.  A DFT of
each latitude row therefore decorrelates the frequencies: the Fourier
coefficients at frequency ``r`` have covariance ``n M_r`` where ``M_r`` is the
DFT of the lag-indexed cross-covariances.  Each row is mapped to real
orthonormal Fourier coordinates (cosine/sine pairs plus the real ``r = 0``
and ``r = n/2`` terms), so the likelihood is a sum of independent real
Gaussian densities with Jacobian one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covmodel import (ModelSpec, ParamVector, _psi_orders, covariance_no_nugget,
                       model_spec)
from .errors import IndefiniteBlockError, MissingDataError, ParameterError
from .geometry import EARTH_RADIUS_KM, Field, GridSpec

__all__ = [
    "CrossCovTensor",
    "SpectralBlocks",
    "MissingDataError",
    "cross_cov_tensor",
    "spectral_blocks",
    "loglik_fft",
    "loglik_dense",
    "dense_covariance",
    "gaussian_loglik_dense",
    "simulate_grid",
]

DENSE_CAP = 4096
_CHUNK_ELEMENTS = 1 << 19
_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class CrossCovTensor:
    """``c[i, j, k] = Cov{Z(L_i, l), Z(L_j, l - k dl)}`` including the nugget at ``k = 0``."""

    grid: GridSpec
    c: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralBlocks:
    """``blocks[r]`` is the ``m x m`` Hermitian cross-spectrum at longitude frequency ``r``."""

    grid: GridSpec
    blocks: np.ndarray

    @property
    def half(self) -> np.ndarray:
        """Blocks for ``r = 0 .. n // 2``, which determine all others."""
        return self.blocks[: self.grid.n // 2 + 1]


def _symmetric_psi(t, p, max_order, min_order):
    """Matern t-derivatives on an ``(m, m, h)`` array symmetric in its first two axes."""
    m = t.shape[0]
    iu, ju = np.triu_indices(m)
    vals = _psi_orders(t[iu, ju], p, max_order, min_order)
    out = []
    for v in vals:
        full = np.empty(t.shape)
        full[iu, ju] = v
        full[ju, iu] = v
        out.append(full)
    return out


def cross_cov_tensor(spec: ModelSpec, params: ParamVector, grid: GridSpec,
                     radius: float = EARTH_RADIUS_KM) -> CrossCovTensor:
    """Lag-indexed cross-covariances between all latitude pairs.

    Only lags ``0 .. n // 2`` are evaluated; the rest follow from
    ``c[i, j, k] = c[j, i, n - k]``.
    """
    spec = model_spec(spec)
    params.validate(spec)
    m, n = grid.shape
    lat = np.radians(grid.lats)
    half = n // 2
    dlr = np.radians(grid.dlon) * np.arange(half + 1)
    c = np.empty((m, m, n))
    step = max(1, _CHUNK_ELEMENTS // (m * m))
    L1 = lat[:, None, None]
    L2 = lat[None, :, None]
    for start in range(0, half + 1, step):
        stop = min(half + 1, start + step)
        c[:, :, start:stop] = covariance_no_nugget(
            spec, params, L1, L2, dlr[None, None, start:stop], radius, _symmetric_psi)
    for k in (0, half) if n % 2 == 0 else (0,):
        c[:, :, k] = 0.5 * (c[:, :, k] + c[:, :, k].T)
    for k in range(half + 1, n):
        c[:, :, k] = c[:, :, n - k].T
    c[np.arange(m), np.arange(m), 0] += params.eps
    if not np.all(np.isfinite(c)):
        raise ParameterError("covariance overflows the double range for these parameters")
    return CrossCovTensor(grid, c)


def spectral_blocks(tensor: CrossCovTensor) -> SpectralBlocks:
    """Unnormalised forward DFT of the tensor along the lag axis, as ``(n, m, m)`` blocks."""
    grid = tensor.grid
    n = tensor.c.shape[2]
    half = np.fft.rfft(tensor.c, axis=2)
    half = np.moveaxis(half, 2, 0)
    half = 0.5 * (half + np.conj(np.swapaxes(half, 1, 2)))
    half[0] = half[0].real
    if n % 2 == 0:
        half[-1] = half[-1].real
    blocks = np.empty((n,) + half.shape[1:], dtype=complex)
    blocks[: half.shape[0]] = half
    for r in range(half.shape[0], n):
        blocks[r] = np.conj(half[n - r])
    return SpectralBlocks(grid, blocks)


def _real_block_groups(blocks: SpectralBlocks):
    """Real covariance matrices of the orthonormal Fourier coordinates, grouped by size.

    Returns ``(frequencies, matrices)`` pairs: the real ``r = 0`` (and
    ``r = n/2``) blocks of size ``m`` and the conjugate-pair blocks
    ``[[Re M, -Im M], [Im M, Re M]]`` of size ``2m``.
    """
    n = blocks.grid.n
    half = blocks.half
    real_r = [0] + ([n // 2] if n % 2 == 0 else [])
    pair_r = list(range(1, (n + 1) // 2))
    groups = [(np.array(real_r), half[real_r].real)]
    if pair_r:
        M = half[pair_r]
        S, T = M.real, M.imag
        top = np.concatenate([S, -T], axis=2)
        bot = np.concatenate([T, S], axis=2)
        groups.append((np.array(pair_r), np.concatenate([top, bot], axis=1)))
    return groups


def _real_coordinates(values: np.ndarray) -> list[np.ndarray]:
    """Orthonormal real Fourier coordinates of each ``(..., m, n)`` row, per group."""
    n = values.shape[-1]
    Y = np.fft.rfft(values, axis=-1)
    Y = np.moveaxis(Y, -1, -2)  # (..., half+1, m)
    real_r = [0] + ([n // 2] if n % 2 == 0 else [])
    pair_r = list(range(1, (n + 1) // 2))
    coords = [Y[..., real_r, :].real / np.sqrt(n)]
    if pair_r:
        P = Y[..., pair_r, :] * np.sqrt(2.0 / n)
        coords.append(np.concatenate([P.real, P.imag], axis=-1))
    return coords


def _from_real_coordinates(coords: list[np.ndarray], m: int, n: int) -> np.ndarray:
    """Inverse of :func:`_real_coordinates`."""
    lead = coords[0].shape[:-2]
    Y = np.zeros(lead + (n // 2 + 1, m), dtype=complex)
    Y[..., 0, :] = coords[0][..., 0, :] * np.sqrt(n)
    if n % 2 == 0:
        Y[..., n // 2, :] = coords[0][..., 1, :] * np.sqrt(n)
    if len(coords) > 1:
        P = coords[1]
        pair_r = list(range(1, (n + 1) // 2))
        Y[..., pair_r, :] = (P[..., :m] + 1j * P[..., m:]) * np.sqrt(n / 2.0)
    return np.fft.irfft(np.moveaxis(Y, -1, -2), n=n, axis=-1)


def _cholesky_groups(blocks: SpectralBlocks):
    out = []
    for freqs, mats in _real_block_groups(blocks):
        try:
            chol = np.linalg.cholesky(mats)
        except np.linalg.LinAlgError:
            for r, M in zip(freqs, mats):
                try:
                    np.linalg.cholesky(M)
                except np.linalg.LinAlgError:
                    lam = np.linalg.eigvalsh(M)[0]
                    raise IndefiniteBlockError(
                        int(r), f"covariance block at frequency {int(r)} is not positive "
                                f"definite (min eigenvalue {lam:.3e})") from None
            raise
        out.append((freqs, chol))
    return out


def _check_complete(field: Field) -> None:
    if not field.complete:
        raise MissingDataError(f"field has {int(field.mask.sum())} missing cells; impute first")


def loglik_fft(field: Field, spec: ModelSpec, params: ParamVector,
               radius: float = EARTH_RADIUS_KM, blocks: SpectralBlocks | None = None) -> float:
    """Exact zero-mean Gaussian log-likelihood of a complete gridded field.

    Parameters
    ----------
    field : Field
        Complete observations on a full longitude circle.
    spec, params
        Covariance model.
    blocks : SpectralBlocks, optional
        Precomputed cross-spectra for ``spec, params`` on ``field.grid``.

    Raises
    ------
    MissingDataError
        If any cell is missing.
    IndefiniteBlockError
        If a frequency block cannot be Cholesky factorised.
    """
    _check_complete(field)
    if blocks is None:
        blocks = spectral_blocks(cross_cov_tensor(spec, params, field.grid, radius))
    coords = _real_coordinates(np.asarray(field.values))
    total = 0.0
    for (freqs, chol), x in zip(_cholesky_groups(blocks), coords):
        w = np.linalg.solve(chol, x[..., None])[..., 0]
        logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        dim = chol.shape[1]
        per = dim * _LOG2PI + logdet + np.einsum("ri,ri->r", w, w)
        total += float(np.sum(per))
    return -0.5 * total


def dense_covariance(spec: ModelSpec, params: ParamVector, grid: GridSpec,
                     radius: float = EARTH_RADIUS_KM, order: str = "lat_fastest") -> np.ndarray:
    """Full ``mn x mn`` covariance matrix of the gridded field.

    ``order="lat_fastest"`` stacks longitude blocks of all latitudes;
    ``"lon_fastest"`` stacks latitude rows.
    """
    spec = model_spec(spec)
    params.validate(spec)
    m, n = grid.shape
    LL, ll = np.meshgrid(grid.lats, grid.lons, indexing="ij")
    if order == "lat_fastest":
        lat, lon = LL.T.ravel(), ll.T.ravel()
    elif order == "lon_fastest":
        lat, lon = LL.ravel(), ll.ravel()
    else:
        raise ValueError("order must be 'lat_fastest' or 'lon_fastest'")
    dl = lon[:, None] - lon[None, :]
    dl = np.mod(dl + 180.0, 360.0) - 180.0
    cov = covariance_no_nugget(spec, params, np.radians(lat)[:, None],
                               np.radians(lat)[None, :], np.radians(dl), radius)
    cov = 0.5 * (cov + cov.T)
    cov[np.diag_indices_from(cov)] += params.eps
    return cov


def gaussian_loglik_dense(values, cov) -> float:
    """Zero-mean Gaussian log-density of ``values`` under covariance ``cov``."""
    z = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (z.size, z.size):
        raise ValueError("covariance shape does not match the data")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise IndefiniteBlockError(-1, "dense covariance is not positive definite") from None
    w = np.linalg.solve(chol, z)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (z.size * _LOG2PI + logdet + float(w @ w))


def loglik_dense(field: Field, spec: ModelSpec, params: ParamVector,
                 radius: float = EARTH_RADIUS_KM, cap: int = DENSE_CAP,
                 order: str = "lat_fastest") -> float:
    """Log-likelihood from the explicit covariance matrix (a reference for :func:`loglik_fft`)."""
    _check_complete(field)
    m, n = field.grid.shape
    if m * n > cap:
        raise ValueError(f"grid has {m * n} cells, above the dense cap {cap}")
    cov = dense_covariance(spec, params, field.grid, radius, order)
    z = field.vector_lat_fastest() if order == "lat_fastest" else field.vector_lon_fastest()
    return gaussian_loglik_dense(z, cov)


def simulate_grid(spec: ModelSpec, params: ParamVector, grid: GridSpec, seed,
                  reps: int = 1, radius: float = EARTH_RADIUS_KM) -> list[Field]:
    """Exact zero-mean Gaussian draws on ``grid``.

    Each frequency's real coordinates are drawn from their block covariance
    and transformed back, so the output covariance equals the model
    covariance exactly.  The same ``seed`` reproduces the same fields.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    blocks = spectral_blocks(cross_cov_tensor(spec, params, grid, radius))
    rng = np.random.default_rng(seed)
    coords = []
    for freqs, chol in _cholesky_groups(blocks):
        z = rng.standard_normal((reps,) + chol.shape[:2])
        coords.append(np.einsum("rij,krj->kri", chol, z))
    values = _from_real_coordinates(coords, grid.m, grid.n)
    return [Field(grid, v) for v in values]
