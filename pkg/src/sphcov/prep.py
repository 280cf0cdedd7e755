"""Gap filling and longitude tapering of gridded fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingDataError
from .geometry import Field

__all__ = ["TaperSpec", "impute_missing", "taper_weights", "taper_field"]


def _neighbor_sums(values: np.ndarray, avail: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum and count of available 8-neighbours; longitude wraps, latitude does not."""
    v = np.where(avail, values, 0.0)
    a = avail.astype(float)
    vp = np.pad(v, ((1, 1), (0, 0)))
    ap = np.pad(a, ((1, 1), (0, 0)))
    m = values.shape[0]
    total = np.zeros_like(v)
    count = np.zeros_like(a)
    for di in (-1, 0, 1):
        rows = slice(1 + di, 1 + di + m)
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            total += np.roll(vp[rows], -dj, axis=1)
            count += np.roll(ap[rows], -dj, axis=1)
    return total, count


def impute_missing(field: Field) -> Field:
    """Fill each missing cell with the mean of its available 8-neighbours.

    Passes repeat until every cell is filled.  Within a pass only cells
    present at the start of the pass count as available, so the result does
    not depend on visiting order.  Longitude wraps around; latitude does not.
    """
    if field.mask.all():
        raise ValueError("field has no observed cells")
    values = np.array(field.values, dtype=float)
    missing = np.array(field.mask)
    while missing.any():
        total, count = _neighbor_sums(values, ~missing)
        fill = missing & (count > 0)
        if not fill.any():
            raise ValueError("missing cells are unreachable from observed cells")
        values[fill] = total[fill] / count[fill]
        missing &= ~fill
    return Field(field.grid, values)


@dataclass(frozen=True)
class TaperSpec:
    """Split cosine bell over ``fraction`` of the row at each end."""

    fraction: float = 0.05
    kind: str = "split_cosine_bell"

    def __post_init__(self):
        if not (0.0 <= self.fraction < 0.5):
            raise ValueError(f"taper fraction must be in [0, 0.5), got {self.fraction!r}")
        if self.kind != "split_cosine_bell":
            raise ValueError(f"unknown taper kind {self.kind!r}")


def taper_weights(n: int, fraction: float) -> np.ndarray:
    """Weights ``0.5 (1 - cos(pi (j + 0.5) / L))`` on the first ``L = floor(fraction n)`` points, mirrored."""
    TaperSpec(fraction)
    L = int(np.floor(fraction * n))
    w = np.ones(n)
    if L:
        j = np.arange(L)
        ramp = 0.5 * (1.0 - np.cos(np.pi * (j + 0.5) / L))
        w[:L] = ramp
        w[n - L:] = ramp[::-1]
    return w


def taper_field(field: Field, spec: TaperSpec | float) -> Field:
    """Multiply each latitude row by :func:`taper_weights`."""
    if not isinstance(spec, TaperSpec):
        spec = TaperSpec(float(spec))
    if not field.complete:
        raise MissingDataError("taper needs a complete field")
    w = taper_weights(field.grid.n, spec.fraction)
    return Field(field.grid, np.asarray(field.values) * w[None, :])
