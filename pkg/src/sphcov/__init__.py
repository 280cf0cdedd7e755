"""Nonstationary covariance models on the sphere with an exact FFT likelihood."""
from __future__ import annotations

from .covmodel import (MODEL_CATALOG, MaternParams, ModelSpec, ParamVector, cov_eval,
                       cov_k1, cov_kz, matern_cov, matern_t_deriv, param_count, pole_check)
from .errors import (ConvergenceError, FormatError, IndefiniteBlockError, MissingDataError,
                     ParameterError, SphcovError)
from .geometry import EARTH_RADIUS_KM, Field, GridSpec, build_grid, chordal_distance

__version__ = "0.1.0"
