"""Spherical distances and the regular latitude-longitude grid.

Angles are in degrees at every public interface and converted to radians
internally.  Grid rows are latitudes in ascending order, columns are
longitudes in ascending order starting near -180.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EARTH_RADIUS_KM",
    "GridSpec",
    "Field",
    "build_grid",
    "chordal_distance",
    "great_circle_distance",
]

EARTH_RADIUS_KM = 6371.0


def _check_lat(*lats) -> None:
    for lat in lats:
        lat = np.asarray(lat, dtype=float)
        if np.any(np.abs(lat) > 90.0) or np.any(np.isnan(lat)):
            raise ValueError("latitude outside [-90, 90]")


def chordal_distance(lat1, lat2, dlon, radius: float = EARTH_RADIUS_KM):
    """Straight-line distance between two points on a sphere of ``radius`` km.

    Parameters
    ----------
    lat1, lat2 : float or array_like
        Latitudes in degrees.
    dlon : float or array_like
        Longitude difference ``l1 - l2`` in degrees.

    Returns
    -------
    float or ndarray
        Distance in the units of ``radius``.
    """
    _check_lat(lat1, lat2)
    L1 = np.radians(lat1)
    L2 = np.radians(lat2)
    dl = np.radians(dlon)
    s = np.sin(0.5 * (L1 - L2)) ** 2 + np.cos(L1) * np.cos(L2) * np.sin(0.5 * dl) ** 2
    out = 2.0 * radius * np.sqrt(np.clip(s, 0.0, 1.0))
    return out if np.ndim(out) else float(out)


def great_circle_distance(lat1, lat2, dlon, radius: float = EARTH_RADIUS_KM):
    """Arc length between two points, ``2R arcsin(ch / 2R)``."""
    ch = np.asarray(chordal_distance(lat1, lat2, dlon, radius))
    out = 2.0 * radius * np.arcsin(np.clip(ch / (2.0 * radius), 0.0, 1.0))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class GridSpec:
    """Regular grid of ``m`` latitudes by ``n`` longitudes covering the full circle.

    ``lon_offset=True`` puts longitude cell centres at
    ``-180 + 360 (j + 0.5) / n`` (centred cells, -179.375 for
    n = 288); ``False`` starts them at exactly -180.
    """

    m: int
    n: int
    lat_min: float
    lat_max: float
    lon_offset: bool = True

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise ValueError("grid dimensions must be integers")
        if self.m < 2 or self.n < 2:
            raise ValueError("grid needs at least 2 latitudes and 2 longitudes")
        if not (-90.0 < self.lat_min < self.lat_max < 90.0):
            raise ValueError("need -90 < lat_min < lat_max < 90")

    @property
    def lats(self) -> np.ndarray:
        return np.linspace(self.lat_min, self.lat_max, self.m)

    @property
    def lons(self) -> np.ndarray:
        j = np.arange(self.n)
        off = 0.5 if self.lon_offset else 0.0
        return -180.0 + 360.0 * (j + off) / self.n

    @property
    def dlat(self) -> float:
        return (self.lat_max - self.lat_min) / (self.m - 1)

    @property
    def dlon(self) -> float:
        return 360.0 / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    def lat_spacing_km(self, radius: float = EARTH_RADIUS_KM) -> float:
        return radius * np.radians(self.dlat)


def build_grid(m: int, n: int, lat_min: float, lat_max: float,
               lon_offset: bool = True) -> GridSpec:
    """Equally spaced latitudes (endpoints included) times a full longitude circle."""
    return GridSpec(int(m), int(n), float(lat_min), float(lat_max), bool(lon_offset))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Field:
    """Values on a :class:`GridSpec`; ``mask`` is True where a cell is missing.

    ``values[i, j]`` is the observation at latitude ``grid.lats[i]`` and
    longitude ``grid.lons[j]``.  Missing cells hold NaN.
    """

    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        mask = np.isnan(vals) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != vals.shape:
            raise ValueError("mask shape does not match values")
        if not np.all(np.isfinite(vals[~mask])):
            raise ValueError("present cells must be finite")
        vals = np.where(mask, np.nan, vals)
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def complete(self) -> bool:
        return not bool(self.mask.any())

    def vector_lat_fastest(self) -> np.ndarray:
        """Stacked longitude blocks, each listing all latitudes (block-circulant order)."""
        return self.values.T.reshape(-1)

    def vector_lon_fastest(self) -> np.ndarray:
        """Stacked latitude rows, each listing all longitudes."""
        return self.values.reshape(-1)

    def with_values(self, values, mask=None) -> "Field":
        return Field(self.grid, values, mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Field):
            return NotImplemented
        return (self.grid == other.grid
                and np.array_equal(self.mask, other.mask)
                and np.array_equal(self.values, other.values, equal_nan=True))

    __hash__ = None
