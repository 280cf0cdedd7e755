"""Plain-text formats: GCG v1 gridded fields and ``name = value`` parameter files."""
from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Mapping

import numpy as np

from .covmodel import ModelSpec, ParamVector, model_spec
from .errors import FormatError, ParameterError
from .geometry import Field, GridSpec

__all__ = [
    "read_field",
    "write_field",
    "read_kv",
    "write_kv",
    "read_params",
    "write_params",
    "write_fit_report",
    "parse_grid",
    "parse_model",
    "format_model",
    "REPORT_KEYS",
]

REPORT_KEYS = frozenset({"model", "loglik", "converged", "iterations", "restarts",
                         "trace_length", "grad_norm", "near_singular", "implicated"})


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_field(path, field: Field) -> None:
    """Write ``field`` as GCG v1 (17 significant digits, ``NA`` for missing)."""
    g = field.grid
    lines = [f"gcg 1 {g.m} {g.n} {_fmt(g.lat_min)} {_fmt(g.lat_max)} {int(g.lon_offset)}"]
    vals = np.asarray(field.values)
    for i in range(g.m):
        lines.append(" ".join("NA" if field.mask[i, j] else _fmt(vals[i, j]) for j in range(g.n)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> Field:
    """Read a GCG v1 file.

    Raises
    ------
    FormatError
        On a bad header, wrong row or column counts, or unparsable values.
    """
    text = Path(path).read_text()
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise FormatError(f"{path}: empty file")
    head = rows[0]
    if len(head) != 7 or head[0] != "gcg" or head[1] != "1":
        raise FormatError(f"{path}: expected header 'gcg 1 m n lat_min lat_max lon_offset_flag'")
    try:
        m, n = int(head[2]), int(head[3])
        lat_min, lat_max = float(head[4]), float(head[5])
        flag = int(head[6])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header value ({exc})") from None
    if flag not in (0, 1):
        raise FormatError(f"{path}: lon_offset_flag must be 0 or 1")
    try:
        grid = GridSpec(m, n, lat_min, lat_max, bool(flag))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    body = rows[1:]
    if len(body) != m:
        raise FormatError(f"{path}: expected {m} data rows, found {len(body)}")
    values = np.empty((m, n))
    for i, row in enumerate(body):
        if len(row) != n:
            raise FormatError(f"{path}: row {i} has {len(row)} values, expected {n}")
        for j, tok in enumerate(row):
            if tok == "NA":
                values[i, j] = np.nan
                continue
            try:
                values[i, j] = float(tok)
            except ValueError:
                raise FormatError(f"{path}: row {i} column {j}: cannot parse {tok!r}") from None
            if not math.isfinite(values[i, j]):
                raise FormatError(f"{path}: row {i} column {j}: non-finite value")
    return Field(grid, values)


_KV_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_\-]*)\s*=\s*(.*?)\s*$")


def read_kv(path) -> dict[str, str]:
    """Parse ``name = value`` lines; ``#`` starts a comment, duplicates are errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        mt = _KV_LINE.match(line)
        if not mt:
            raise FormatError(f"{path}:{lineno}: expected 'name = value'")
        key, val = mt.group(1), mt.group(2)
        if key in out:
            raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def write_kv(path, items: Mapping[str, object]) -> None:
    lines = []
    for k, v in items.items():
        if isinstance(v, float):
            v = _fmt(v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_model(text: str) -> ModelSpec:
    """A letter ``A``..``J`` or ``custom:m,n1,n2,n3`` with ``-`` for absent terms."""
    text = text.strip()
    if text.lower().startswith("custom:"):
        parts = text.split(":", 1)[1].split(",")
        if len(parts) != 4:
            raise ParameterError("custom model needs four orders m,n1,n2,n3")
        try:
            orders = [None if p.strip() in ("-", "") else int(p) for p in parts]
        except ValueError:
            raise ParameterError(f"bad custom model orders {text!r}") from None
        if orders[0] is None:
            raise ParameterError("custom model needs a rescale order m")
        try:
            return ModelSpec(*orders)
        except ValueError as exc:
            raise ParameterError(str(exc)) from None
    try:
        return ModelSpec.from_letter(text)
    except ValueError as exc:
        raise ParameterError(str(exc)) from None


def format_model(spec: ModelSpec) -> str:
    if spec.letter:
        return spec.letter
    return "custom:" + ",".join("-" if v is None else str(v) for v in spec.orders)


def _parse_float(key: str, val: str, path) -> float:
    try:
        return float(val)
    except ValueError:
        raise FormatError(f"{path}: {key}: cannot parse {val!r} as a number") from None


def read_params(path, spec: ModelSpec | str | None = None) -> tuple[ModelSpec, ParamVector]:
    """Read parameters (or a fit report) for ``spec``.

    ``spec`` may be omitted when the file carries a ``model`` line.  Keys
    other than the model's parameter names, ``fixed``, ``se_<name>`` and the
    fit-report fields are rejected.
    """
    kv = read_kv(path)
    if spec is None:
        if "model" not in kv:
            raise FormatError(f"{path}: no model given on the command line or in the file")
        spec = parse_model(kv["model"])
    else:
        spec = model_spec(spec) if not isinstance(spec, str) else parse_model(spec)
        if "model" in kv and parse_model(kv["model"]) != spec:
            raise ParameterError(f"{path}: file is for model {kv['model']}, not {spec.label}")
    names = set(spec.param_names())
    values: dict[str, float] = {}
    fixed: list[str] = []
    for key, val in kv.items():
        if key in names:
            values[key] = _parse_float(key, val, path)
        elif key == "fixed":
            fixed = [s.strip() for s in val.split(",") if s.strip()]
        elif key in REPORT_KEYS or (key.startswith("se_") and key[3:] in names):
            continue
        else:
            raise FormatError(f"{path}: unknown key {key!r} for model {spec.label}")
    bad = set(fixed) - names
    if bad:
        raise ParameterError(f"{path}: fixed names not in model {spec.label}: {sorted(bad)}")
    return spec, ParamVector.from_dict(spec, values, fixed=fixed)


def write_params(path, spec: ModelSpec, params: ParamVector,
                 extra: Mapping[str, object] | None = None) -> None:
    items: dict[str, object] = {"model": format_model(spec)}
    items.update(params.as_dict(spec))
    if params.fixed:
        items["fixed"] = ",".join(n for n in spec.param_names() if n in params.fixed)
    if extra:
        items.update(extra)
    write_kv(path, items)


def write_fit_report(path, fit) -> None:
    """Estimates, standard errors and convergence details of a :class:`FitResult`."""
    extra: dict[str, object] = {"loglik": float(fit.loglik)}
    for name in fit.free_names:
        extra[f"se_{name}"] = float(fit.ses.get(name, float("nan")))
    extra.update(converged=bool(fit.converged), iterations=int(fit.iterations),
                 restarts=int(fit.restarts), trace_length=len(fit.trace),
                 grad_norm=float(fit.grad_norm))
    info = fit.hessian_info
    if info is not None:
        extra["near_singular"] = bool(info.near_singular)
        if info.implicated:
            extra["implicated"] = ",".join(info.implicated)
    est = fit.estimates.with_fixed(fit.fixed & set(fit.spec.param_names()))
    write_params(path, fit.spec, est, extra)


_GRID = re.compile(r"^(\d+)x(\d+):([-+0-9.eE]+):([-+0-9.eE]+)(?::(offset|nooffset))?$")


def parse_grid(text: str) -> GridSpec:
    """``MxN:lat_min:lat_max[:offset|:nooffset]``, e.g. ``20x48:-49.5:49.5``."""
    mt = _GRID.match(text.strip())
    if not mt:
        raise FormatError(f"bad grid {text!r}; expected MxN:lat_min:lat_max[:offset|:nooffset]")
    try:
        return GridSpec(int(mt.group(1)), int(mt.group(2)), float(mt.group(3)),
                        float(mt.group(4)), mt.group(5) != "nooffset")
    except ValueError as exc:
        raise FormatError(f"bad grid {text!r}: {exc}") from None
