"""Real spherical-harmonic regression for the mean field."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import MissingDataError
from .geometry import Field, GridSpec

__all__ = ["MeanModel", "RankDeficiencyError", "sh_basis", "sh_columns", "fit_mean",
           "CONVENTION"]

CONVENTION = "real-orthonormal-v1"
DEFAULT_DEGREE = 12


class RankDeficiencyError(ValueError):
    """The design matrix does not have full column rank on this grid."""

    def __init__(self, columns: list[int], labels: list[tuple]):
        self.columns = columns
        self.labels = labels
        super().__init__(f"design matrix is rank deficient; dependent columns {columns} "
                         f"(degree, order, part) {labels}")


def sh_columns(degree: int) -> list[tuple[int, int, str]]:
    """Column labels ``(n, m, part)``: per degree the zonal term then cos/sin pairs by order."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    cols = []
    for n in range(degree + 1):
        cols.append((n, 0, "zonal"))
        for m in range(1, n + 1):
            cols += [(n, m, "cos"), (n, m, "sin")]
    return cols


def _normalized_legendre(degree: int, x: np.ndarray) -> np.ndarray:
    """``Pbar[n, m]`` with ``int (Pbar_nm trig(m l))**2 dOmega = 4 pi`` (trig = 1 for m = 0)."""
    u = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((degree + 1, degree + 1) + x.shape)
    P[0, 0] = 1.0
    for m in range(1, degree + 1):
        f = np.sqrt(3.0) if m == 1 else np.sqrt((2.0 * m + 1.0) / (2.0 * m))
        P[m, m] = f * u * P[m - 1, m - 1]
    for m in range(degree):
        P[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * P[m, m]
        for n in range(m + 2, degree + 1):
            a = np.sqrt((2.0 * n - 1.0) * (2.0 * n + 1.0) / ((n - m) * (n + m)))
            b = np.sqrt((2.0 * n + 1.0) * (n + m - 1.0) * (n - m - 1.0)
                        / ((n - m) * (n + m) * (2.0 * n - 3.0)))
            P[n, m] = a * x * P[n - 1, m] - b * P[n - 2, m]
    return P


def _basis_at(lat_deg: np.ndarray, lon_deg: np.ndarray, degree: int) -> np.ndarray:
    x = np.sin(np.radians(lat_deg))
    lon = np.radians(lon_deg)
    P = _normalized_legendre(degree, x) / np.sqrt(4.0 * np.pi)
    cols = []
    for n, m, part in sh_columns(degree):
        if part == "zonal":
            cols.append(P[n, 0])
        elif part == "cos":
            cols.append(P[n, m] * np.cos(m * lon))
        else:
            cols.append(P[n, m] * np.sin(m * lon))
    return np.stack(cols, axis=-1)


def sh_basis(grid: GridSpec, degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Design matrix of real orthonormal spherical harmonics, rows in latitude-major order.

    Row ``i * n + j`` is the cell ``(grid.lats[i], grid.lons[j])``; columns
    follow :func:`sh_columns`.  Each column is ``Pbar_n^m(sin L)`` times
    ``1``, ``cos(m l)`` or ``sin(m l)``, scaled to unit L2 norm on the sphere.
    """
    LL, ll = np.meshgrid(grid.lats, grid.lons, indexing="ij")
    return _basis_at(LL.ravel(), ll.ravel(), degree)


@dataclass(frozen=True, eq=False)
class MeanModel:
    degree: int
    coeffs: np.ndarray
    convention: str = CONVENTION

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != ((self.degree + 1) ** 2,):
            raise ValueError(f"degree {self.degree} needs {(self.degree + 1) ** 2} coefficients")
        object.__setattr__(self, "coeffs", c)

    def evaluate(self, grid: GridSpec) -> Field:
        return Field(grid, (sh_basis(grid, self.degree) @ self.coeffs).reshape(grid.shape))


def fit_mean(field: Field, degree: int = DEFAULT_DEGREE, area_weighted: bool = False,
             rcond: float = 1e-10) -> tuple[MeanModel, Field, Field]:
    """Least-squares spherical-harmonic fit by column-pivoted QR.

    Returns the model, the fitted field and the residual ``field - fitted``.
    With ``area_weighted=True`` rows are weighted by ``cos(latitude)``.

    Raises
    ------
    RankDeficiencyError
        When some columns are numerically dependent on the others.
    """
    if not field.complete:
        raise MissingDataError("mean fit needs a complete field; impute first")
    grid = field.grid
    X = sh_basis(grid, degree)
    if X.shape[0] < X.shape[1]:
        raise ValueError(f"{X.shape[0]} cells cannot determine {X.shape[1]} coefficients")
    y = field.vector_lon_fastest()
    if area_weighted:
        w = np.sqrt(np.repeat(np.cos(np.radians(grid.lats)), grid.n))
        Xw, yw = X * w[:, None], y * w
    else:
        Xw, yw = X, y
    Q, R, piv = scipy.linalg.qr(Xw, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rcond * diag[0]))
    if rank < X.shape[1]:
        bad = sorted(int(c) for c in piv[rank:])
        labels = sh_columns(degree)
        raise RankDeficiencyError(bad, [labels[c] for c in bad])
    z = scipy.linalg.solve_triangular(R, Q.T @ yw)
    coeffs = np.empty_like(z)
    coeffs[piv] = z
    model = MeanModel(degree, coeffs)
    fitted = (X @ coeffs).reshape(grid.shape)
    return model, Field(grid, fitted), Field(grid, np.asarray(field.values) - fitted)
