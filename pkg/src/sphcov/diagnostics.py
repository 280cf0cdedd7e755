"""Empirical and model-implied summary statistics of gridded fields.

Profile curves are variances of simple linear stencils (single values,
longitude differences, mixed differences) estimated along each latitude or
longitude with mean-corrected sample variances.  Directional variograms are
root mean squared increments to one of the eight neighbouring cells.  The
fitted counterparts evaluate the same stencils under a covariance model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .covmodel import ModelSpec, ParamVector, covariance_no_nugget, model_spec
from .errors import MissingDataError
from .geometry import EARTH_RADIUS_KM, Field, GridSpec

__all__ = [
    "PROFILE_KINDS",
    "DIRECTIONS",
    "ProfileCurve",
    "DirVariogramRow",
    "empirical_profile",
    "fitted_profile",
    "empirical_dir_variogram",
    "fitted_dir_variogram",
    "dir_variogram_table",
    "stencil_variance",
]

PROFILE_KINDS = ("var_by_lon", "var_by_lat", "lon_diff1", "lon_diff2", "cross_diff")

# direction -> (latitude index step, longitude index step) of the partner cell
DIRECTIONS: dict[str, tuple[int, int]] = {
    "SE": (-1, 1), "S": (-1, 0), "SW": (-1, -1), "W": (0, -1),
    "NW": (1, -1), "N": (1, 0), "NE": (1, 1), "E": (0, 1),
}

# stencils as (latitude offset, longitude offset, weight)
_STENCILS = {
    "var_by_lat": ((0, 0, 1.0),),
    "lon_diff1": ((0, 0, 1.0), (0, -1, -1.0)),
    "lon_diff2": ((0, 1, 1.0), (0, 0, -2.0), (0, -1, 1.0)),
    "cross_diff": ((0, 1, 1.0), (0, 0, -1.0), (-1, 1, -1.0), (-1, 0, 1.0)),
}


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """One summary curve; values are variances (take square roots for standard deviations)."""

    which: str
    axis: np.ndarray
    empirical: np.ndarray | None = None
    fitted: np.ndarray | None = None

    def __post_init__(self):
        if self.which not in PROFILE_KINDS:
            raise ValueError(f"unknown profile {self.which!r}; expected one of {PROFILE_KINDS}")
        if self.which == "var_by_lon" and self.fitted is not None:
            raise ValueError("var_by_lon has no fitted curve (constant under axial symmetry)")
        for name in ("empirical", "fitted"):
            v = getattr(self, name)
            if v is not None and len(v) != len(self.axis):
                raise ValueError(f"{name} length does not match the axis")


@dataclass(frozen=True)
class DirVariogramRow:
    latitude: float
    direction: str
    empirical: float
    fitted: dict[str, float] = field(default_factory=dict)


def _sample_var(x: np.ndarray, axis: int) -> np.ndarray:
    return np.var(x, axis=axis, ddof=1)


def empirical_profile(field_: Field, which: str) -> ProfileCurve:
    """Sample-variance profile of a complete field.

    ``var_by_lon``
        variance across latitudes at each longitude (divisor ``m - 1``);
    ``var_by_lat``
        variance across longitudes at each latitude (divisor ``n - 1``);
    ``lon_diff1``
        variance of the ``n - 1`` first longitude differences;
    ``lon_diff2``
        variance of the ``n - 2`` second longitude differences;
    ``cross_diff``
        variance of the ``n - 1`` mixed latitude/longitude differences,
        for latitudes ``1 .. m - 1`` paired with the one below.

    No wraparound across the date line.
    """
    if not field_.complete:
        raise MissingDataError("profile needs a complete field")
    Z = np.asarray(field_.values)
    grid = field_.grid
    if which == "var_by_lon":
        return ProfileCurve(which, grid.lons, _sample_var(Z, axis=0))
    if which == "var_by_lat":
        return ProfileCurve(which, grid.lats, _sample_var(Z, axis=1))
    if which == "lon_diff1":
        return ProfileCurve(which, grid.lats, _sample_var(Z[:, 1:] - Z[:, :-1], axis=1))
    if which == "lon_diff2":
        if grid.n < 4:
            raise ValueError("second differences need at least 4 longitudes")
        D2 = Z[:, 2:] - 2.0 * Z[:, 1:-1] + Z[:, :-2]
        return ProfileCurve(which, grid.lats, _sample_var(D2, axis=1))
    if which == "cross_diff":
        if grid.m < 2:
            raise ValueError("cross differences need at least 2 latitudes")
        D = (Z[1:, 1:] - Z[1:, :-1]) - (Z[:-1, 1:] - Z[:-1, :-1])
        return ProfileCurve(which, grid.lats[1:], _sample_var(D, axis=1))
    raise ValueError(f"unknown profile {which!r}; expected one of {PROFILE_KINDS}")


def stencil_variance(spec: ModelSpec, params: ParamVector, grid: GridSpec,
                     lat_index, stencil, radius: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Variance of ``sum_p w_p Z(L_{i + di_p}, l + dj_p * dlon)`` for each ``i`` in ``lat_index``.

    ``stencil`` is a sequence of ``(di, dj, w)``.  Evaluates
    ``sum_pq w_p w_q K(L_p, L_q, l_p - l_q)``, adding the nugget where two
    stencil entries are the same cell.
    """
    spec = model_spec(spec)
    params.validate(spec)
    idx = np.atleast_1d(np.asarray(lat_index, dtype=int))
    di = np.array([s[0] for s in stencil])
    dj = np.array([s[1] for s in stencil], dtype=float)
    w = np.array([s[2] for s in stencil], dtype=float)
    rows = idx[:, None] + di[None, :]
    if rows.min() < 0 or rows.max() >= grid.m:
        raise ValueError("stencil reaches outside the latitude range")
    lat = np.radians(grid.lats[rows])
    dl = np.radians((dj[:, None] - dj[None, :]) * grid.dlon)
    K = covariance_no_nugget(spec, params, lat[:, :, None], lat[:, None, :], dl[None], radius)
    same = (rows[:, :, None] == rows[:, None, :]) & (dj[:, None] == dj[None, :])[None]
    K = K + params.eps * same
    return np.einsum("p,ipq,q->i", w, K, w)


def fitted_profile(spec: ModelSpec, params: ParamVector, grid: GridSpec, which: str,
                   radius: float = EARTH_RADIUS_KM) -> ProfileCurve:
    """Model-implied values of the :func:`empirical_profile` quantities per latitude."""
    if which == "var_by_lon":
        return ProfileCurve(which, grid.lons, None, None)
    if which not in _STENCILS:
        raise ValueError(f"unknown profile {which!r}; expected one of {PROFILE_KINDS}")
    idx = np.arange(1, grid.m) if which == "cross_diff" else np.arange(grid.m)
    vals = stencil_variance(spec, params, grid, idx, _STENCILS[which], radius)
    return ProfileCurve(which, grid.lats[idx], None, vals)


def _check_direction(grid: GridSpec, lat_index: int, direction: str) -> tuple[int, int]:
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}; expected one of {list(DIRECTIONS)}")
    di, dj = DIRECTIONS[direction]
    if not (0 <= lat_index < grid.m) or not (0 <= lat_index + di < grid.m):
        raise ValueError(f"latitude index {lat_index} has no {direction} neighbour")
    return di, dj


def empirical_dir_variogram(field_: Field, lat_index: int, direction: str) -> float:
    """Root mean squared increment to the neighbour in ``direction`` (no mean removal).

    Increments run over all longitude pairs inside the row (``n - 1`` for
    directions with a longitude step, ``n`` otherwise).
    """
    if not field_.complete:
        raise MissingDataError("variogram needs a complete field")
    di, dj = _check_direction(field_.grid, lat_index, direction)
    Z = np.asarray(field_.values)
    n = field_.grid.n
    a = Z[lat_index]
    b = Z[lat_index + di]
    if dj == 1:
        inc = a[:-1] - b[1:]
    elif dj == -1:
        inc = a[1:] - b[:-1]
    else:
        inc = a - b
    return float(np.sqrt(np.mean(inc ** 2)))


def fitted_dir_variogram(spec: ModelSpec, params: ParamVector, grid: GridSpec,
                         lat_index: int, direction: str,
                         radius: float = EARTH_RADIUS_KM) -> float:
    """Square root of ``K(L_i, L_i, 0) + K(L', L', 0) - 2 K(L_i, L', l_j - l')`` for the neighbour."""
    di, dj = _check_direction(grid, lat_index, direction)
    v = stencil_variance(spec, params, grid, [lat_index], ((0, 0, 1.0), (di, dj, -1.0)), radius)
    return float(np.sqrt(max(v[0], 0.0)))


def dir_variogram_table(field_: Field | None, models: Mapping[str, tuple[ModelSpec, ParamVector]],
                        lat_index: int, grid: GridSpec | None = None,
                        radius: float = EARTH_RADIUS_KM) -> list[DirVariogramRow]:
    """All eight directions at one latitude, empirical and per-model fitted values.

    Directions without a neighbour inside the grid are skipped.
    """
    grid = grid or field_.grid
    out = []
    for direction, (di, _) in DIRECTIONS.items():
        if not (0 <= lat_index + di < grid.m):
            continue
        emp = (empirical_dir_variogram(field_, lat_index, direction)
               if field_ is not None else float("nan"))
        fitted = {label: fitted_dir_variogram(s, p, grid, lat_index, direction, radius)
                  for label, (s, p) in models.items()}
        out.append(DirVariogramRow(float(grid.lats[lat_index]), direction, emp, fitted))
    return out
