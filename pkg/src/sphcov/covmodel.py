"""Covariance functions for axially symmetric processes on the sphere.

The building blocks are

* ``K0(d) = alpha (d/beta)**nu K_nu(d/beta)``, a Matern covariance in the
  chordal distance ``d``;
* ``K1 = P(L1; k) P(L2; k) K0 + eps 1{coincident}``, a latitude-rescaled
  Matern plus nugget;
* ``KZ``, the covariance of ``A(L) dZ0/dL + B(L) dZ0/dl`` for a Matern
  field ``Z0``, where ``A`` and ``B`` are Legendre series in ``sin L``;
* a second copy ``A2(L) dZ2/dL`` sharing the operator Matern parameters.

Derivatives of ``K0`` are taken through ``t = ch**2`` (smooth everywhere,
unlike ``ch``), using ``d/dt [alpha g_nu(sqrt(t)/beta)] =
-alpha/(2 beta**2) g_{nu-1}(sqrt(t)/beta)`` with ``g_a(x) = x**a K_a(x)``.
Latitude derivatives are per radian; longitudes enter only through the lag
``dl = l1 - l2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import ParameterError
from .geometry import EARTH_RADIUS_KM, chordal_distance
from .specialfn import check_coeffs, legendre_series, xnu_bessel_k_ladder

__all__ = [
    "MODEL_CATALOG",
    "PUBLISHED_COUNTS",
    "MaternParams",
    "ModelSpec",
    "ParamVector",
    "matern_cov",
    "matern_t_deriv",
    "cov_k1",
    "cov_kz",
    "cov_eval",
    "pole_check",
    "param_count",
    "count_discrepancy",
    "model_spec",
    "random_params",
]

# letter -> (rescale order m, A order n1, B order n2, second-copy order n3).
# G is listed with n2 = 0 in the published table but described as the fit
# with B set to zero; its parameter count (16) confirms B is absent.
MODEL_CATALOG: dict[str, tuple[int, int | None, int | None, int | None]] = {
    "A": (0, None, None, None),
    "B": (3, None, None, None),
    "C": (6, None, None, None),
    "D": (0, 3, 3, None),
    "E": (0, 6, 6, None),
    "F": (3, 3, 3, None),
    "G": (3, 6, None, None),
    "H": (3, 6, 6, None),
    "I": (6, 6, 6, None),
    "J": (6, 6, 6, 6),
}

PUBLISHED_COUNTS = {"A": 4, "B": 7, "C": 10, "D": 14, "E": 20, "F": 17,
                 "G": 16, "H": 23, "I": 26, "J": 30}

SCALAR_BASE = ("alpha", "beta", "nu", "eps")
SCALAR_OP = ("alpha1", "beta1", "nu1")


@dataclass(frozen=True)
class MaternParams:
    alpha: float
    beta: float
    nu: float

    def __post_init__(self):
        for name in ("alpha", "beta", "nu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"Matern {name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Which covariance family to use.

    ``a_order is None`` means no differential-operator component;
    ``b_order is None`` means ``B == 0``; ``c_order is None`` means no
    second copy.
    """

    rescale_order: int = 0
    a_order: int | None = None
    b_order: int | None = None
    c_order: int | None = None
    letter: str | None = None

    def __post_init__(self):
        if self.rescale_order < 0:
            raise ValueError("rescale order must be >= 0")
        for name in ("a_order", "b_order", "c_order"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.a_order is None and (self.b_order is not None or self.c_order is not None):
            raise ValueError("B and second-copy terms need the operator component (a_order)")

    @classmethod
    def from_letter(cls, letter: str) -> "ModelSpec":
        key = letter.upper()
        if key not in MODEL_CATALOG:
            raise ValueError(f"unknown model letter {letter!r}")
        m, n1, n2, n3 = MODEL_CATALOG[key]
        return cls(m, n1, n2, n3, letter=key)

    @property
    def has_operator(self) -> bool:
        return self.a_order is not None

    @property
    def orders(self) -> tuple[int, int | None, int | None, int | None]:
        return (self.rescale_order, self.a_order, self.b_order, self.c_order)

    @property
    def label(self) -> str:
        if self.letter:
            return self.letter
        fmt = lambda v: "-" if v is None else str(v)
        return "custom(" + ",".join(fmt(v) for v in self.orders) + ")"

    def param_names(self) -> list[str]:
        """Free parameter names in canonical order (k0 and a0 are fixed at 1)."""
        names = list(SCALAR_BASE) + [f"k{i}" for i in range(1, self.rescale_order + 1)]
        if self.has_operator:
            names += list(SCALAR_OP)
            names += [f"a{i}" for i in range(1, self.a_order + 1)]
            if self.b_order is not None:
                names += [f"b{i}" for i in range(self.b_order + 1)]
            if self.c_order is not None:
                names += [f"c{i}" for i in range(self.c_order + 1)]
        return names


def model_spec(letter_or_spec) -> ModelSpec:
    if isinstance(letter_or_spec, ModelSpec):
        return letter_or_spec
    return ModelSpec.from_letter(str(letter_or_spec))


def param_count(spec: ModelSpec) -> int:
    """Number of free covariance parameters of ``spec``."""
    return len(model_spec(spec).param_names())


def count_discrepancy(spec: ModelSpec) -> str | None:
    """Explain a mismatch between the implemented and the published count, if any."""
    spec = model_spec(spec)
    if spec.letter is None or spec.letter not in PUBLISHED_COUNTS:
        return None
    published = PUBLISHED_COUNTS[spec.letter]
    ours = param_count(spec)
    if ours == published:
        return None
    return (f"model {spec.letter}: implemented count {ours} differs from the published "
            f"{published}; the constraints on c0..c{spec.c_order} that would remove "
            f"{ours - published} parameters are not stated, so all are kept free")


def _coeff_array(values, length: int, lead: float | None, name: str) -> np.ndarray:
    c = check_coeffs(values)
    if c.size != length:
        raise ParameterError(f"{name} needs {length} coefficients, got {c.size}")
    if lead is not None and c[0] != lead:
        raise ParameterError(f"{name}[0] is fixed at {lead}")
    return c


@dataclass(frozen=True, eq=False)
class ParamVector:
    """All covariance parameters of a model.

    ``k`` and ``a`` include their fixed leading coefficient 1.  ``fixed``
    names free parameters that an optimiser must hold at their current
    value.
    """

    alpha: float
    beta: float
    nu: float
    eps: float
    k: np.ndarray = field(default_factory=lambda: np.ones(1))
    alpha1: float | None = None
    beta1: float | None = None
    nu1: float | None = None
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    c: np.ndarray | None = None
    fixed: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "k", check_coeffs(self.k))
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, check_coeffs(v))
        object.__setattr__(self, "fixed", frozenset(self.fixed))

    @property
    def base(self) -> MaternParams:
        return MaternParams(self.alpha, self.beta, self.nu)

    @property
    def op_matern(self) -> MaternParams:
        return MaternParams(self.alpha1, self.beta1, self.nu1)

    def validate(self, spec: ModelSpec) -> "ParamVector":
        """Raise ParameterError unless these parameters are admissible for ``spec``."""
        self.base  # positivity
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise ParameterError(f"nugget eps must be >= 0, got {self.eps!r}")
        _coeff_array(self.k, spec.rescale_order + 1, 1.0, "k")
        if spec.has_operator:
            if None in (self.alpha1, self.beta1, self.nu1):
                raise ParameterError("operator component needs alpha1, beta1, nu1")
            self.op_matern
            if not self.nu1 > 1:
                raise ParameterError(f"nu1 must exceed 1 for a differentiable field, got {self.nu1!r}")
            if self.a is None:
                raise ParameterError("operator component needs coefficients a")
            _coeff_array(self.a, spec.a_order + 1, 1.0, "a")
            if spec.b_order is not None:
                if self.b is None:
                    raise ParameterError("model needs coefficients b")
                _coeff_array(self.b, spec.b_order + 1, None, "b")
            elif self.b is not None:
                raise ParameterError("model has B == 0 but coefficients b were given")
            if spec.c_order is not None:
                if self.c is None:
                    raise ParameterError("model needs coefficients c")
                _coeff_array(self.c, spec.c_order + 1, None, "c")
            elif self.c is not None:
                raise ParameterError("model has no second copy but coefficients c were given")
        elif any(v is not None for v in (self.alpha1, self.beta1, self.nu1, self.a, self.b, self.c)):
            raise ParameterError("operator parameters given for a model without an operator term")
        unknown = set(self.fixed) - set(spec.param_names())
        if unknown:
            raise ParameterError(f"fixed names not in model: {sorted(unknown)}")
        return self

    def as_dict(self, spec: ModelSpec) -> dict[str, float]:
        out = {"alpha": self.alpha, "beta": self.beta, "nu": self.nu, "eps": self.eps}
        for i in range(1, spec.rescale_order + 1):
            out[f"k{i}"] = float(self.k[i])
        if spec.has_operator:
            out.update(alpha1=self.alpha1, beta1=self.beta1, nu1=self.nu1)
            for i in range(1, spec.a_order + 1):
                out[f"a{i}"] = float(self.a[i])
            if spec.b_order is not None:
                for i in range(spec.b_order + 1):
                    out[f"b{i}"] = float(self.b[i])
            if spec.c_order is not None:
                for i in range(spec.c_order + 1):
                    out[f"c{i}"] = float(self.c[i])
        return {k: float(v) for k, v in out.items()}

    @classmethod
    def from_dict(cls, spec: ModelSpec, values: Mapping[str, float],
                  fixed=()) -> "ParamVector":
        """Build from ``name -> value``; omitted polynomial coefficients default to 0."""
        names = set(spec.param_names())
        unknown = set(values) - names
        if unknown:
            raise ParameterError(f"parameters not in model {spec.label}: {sorted(unknown)}")
        required = list(SCALAR_BASE) + (list(SCALAR_OP) if spec.has_operator else [])
        missing = [r for r in required if r not in values]
        if missing:
            raise ParameterError(f"missing parameters: {missing}")

        def series(prefix, order, lead):
            if order is None:
                return None
            start = 0 if lead is None else 1
            vals = [values.get(f"{prefix}{i}", 0.0) for i in range(start, order + 1)]
            return np.array(([lead] if lead is not None else []) + vals, dtype=float)

        kw = dict(alpha=float(values["alpha"]), beta=float(values["beta"]),
                  nu=float(values["nu"]), eps=float(values["eps"]),
                  k=series("k", spec.rescale_order, 1.0), fixed=frozenset(fixed))
        if spec.has_operator:
            kw.update(alpha1=float(values["alpha1"]), beta1=float(values["beta1"]),
                      nu1=float(values["nu1"]), a=series("a", spec.a_order, 1.0),
                      b=series("b", spec.b_order, None), c=series("c", spec.c_order, None))
        return cls(**kw).validate(spec)

    def to_array(self, spec: ModelSpec, names=None) -> np.ndarray:
        d = self.as_dict(spec)
        return np.array([d[n] for n in (names or spec.param_names())])

    def with_values(self, spec: ModelSpec, updates: Mapping[str, float]) -> "ParamVector":
        d = self.as_dict(spec)
        d.update({k: float(v) for k, v in updates.items()})
        return ParamVector.from_dict(spec, d, fixed=self.fixed)

    def with_fixed(self, fixed) -> "ParamVector":
        return replace(self, fixed=frozenset(fixed))

    def embedded(self, spec_from: ModelSpec, spec_to: ModelSpec) -> "ParamVector":
        """Re-express in a larger nested model with the extra coefficients at zero."""
        d = self.as_dict(spec_from)
        if spec_to.has_operator and not spec_from.has_operator:
            raise ParameterError("cannot embed a model without an operator into one with it")
        target = set(spec_to.param_names())
        lost = set(d) - target
        if lost:
            raise ParameterError(f"{spec_to.label} does not nest {spec_from.label}: {sorted(lost)}")
        return ParamVector.from_dict(spec_to, d)

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        def same(x, y):
            if x is None or y is None:
                return x is y
            return np.array_equal(np.asarray(x), np.asarray(y))
        return all(same(getattr(self, f), getattr(other, f))
                   for f in ("alpha", "beta", "nu", "eps", "k", "alpha1", "beta1",
                             "nu1", "a", "b", "c")) and self.fixed == other.fixed

    __hash__ = None


# ---------------------------------------------------------------------------
# Matern pieces

def matern_cov(d, p: MaternParams):
    """``alpha (d/beta)**nu K_nu(d/beta)``; equals ``alpha 2**(nu-1) Gamma(nu)`` at d = 0."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = p.alpha * xnu_bessel_k_ladder(p.nu, 1, d / p.beta)[0]
    return out if out.ndim else float(out)


def _psi_orders(t: np.ndarray, p: MaternParams, max_order: int, min_order: int = 0) -> list[np.ndarray]:
    """psi^(j)(t) for j = min_order..max_order, psi(t) = alpha g_nu(sqrt(t)/beta)."""
    x = np.sqrt(t) / p.beta
    ladder = xnu_bessel_k_ladder(p.nu - max_order, max_order - min_order + 1, x)
    # ladder[i] has order nu - max_order + i, i.e. derivative j = max_order - i
    out = []
    for j in range(min_order, max_order + 1):
        g = ladder[max_order - j]
        out.append(p.alpha * (-0.5 / p.beta ** 2) ** j * g)
    return out


def matern_t_deriv(t, p: MaternParams, order: int = 0):
    """Derivative of ``psi(t) = alpha (sqrt(t)/beta)**nu K_nu(sqrt(t)/beta)`` in ``t``.

    Parameters
    ----------
    t : float or array_like
        Squared distance (km**2), >= 0.
    p : MaternParams
    order : {0, 1, 2}

    Raises
    ------
    ValueError
        If the derivative is infinite at a requested ``t = 0`` (``nu <= order``)
        or not representable by the order-lowering ladder (``order - nu >= 1``).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if p.nu - order <= -1:
        raise ValueError(f"order {order} derivative needs nu > {order - 1}")
    if p.nu <= order and np.any(t == 0):
        raise ValueError(f"order {order} derivative is infinite at t = 0 unless nu > {order}")
    out = _psi_orders(t, p, order, order)[0]
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# geometry of t = ch**2

def _t_partials(L1, L2, dl, radius: float) -> dict[str, np.ndarray]:
    """``t(L1, L2, dl) = ch**2`` and its first and second partials (radians).

    Written so that every first partial is exactly zero at coincident points.
    """
    s1, c1 = np.sin(L1), np.cos(L1)
    s2, c2 = np.sin(L2), np.cos(L2)
    sd, cd = np.sin(dl), np.cos(dl)
    half = np.sin(0.5 * dl) ** 2
    r2 = 2.0 * radius * radius
    return {
        "t": 2.0 * r2 * (np.sin(0.5 * (L1 - L2)) ** 2 + c1 * c2 * half),
        "1": r2 * (np.sin(L1 - L2) - 2.0 * s1 * c2 * half),
        "2": r2 * (np.sin(L2 - L1) - 2.0 * c1 * s2 * half),
        "d": r2 * c1 * c2 * sd,
        "12": -r2 * (c1 * c2 + s1 * s2 * cd),
        "1d": -r2 * s1 * c2 * sd,
        "d2": -r2 * c1 * s2 * sd,
        "dd": r2 * c1 * c2 * cd,
    }


PsiFn = Callable[[np.ndarray, MaternParams, int, int], list]


def _operator_psi(t, p: MaternParams, psi_fn: PsiFn | None):
    """(psi', psi'') of the operator Matern."""
    d1, d2 = (psi_fn or _psi_orders)(t, p, 2, 1)
    return d1, d2


def _kz_terms(A1, B1, A2, B2, part, d1, d2):
    """Combine Matern t-derivatives into the operator covariance."""
    zero = part["t"] == 0
    with np.errstate(invalid="ignore", over="ignore"):
        curv = np.where(zero, 0.0, d2)

    def C(u, v, uv):
        return curv * part[u] * part[v] + d1 * part[uv]

    out = A1 * A2 * C("1", "2", "12")
    if B2 is not None:
        out = out - A1 * B2 * C("1", "d", "1d")
    if B1 is not None:
        out = out + B1 * A2 * C("d", "2", "d2")
    if B1 is not None and B2 is not None:
        out = out - B1 * B2 * C("d", "d", "dd")
    return out


def _radians(L1, L2, dl):
    L1 = np.asarray(L1, dtype=float)
    L2 = np.asarray(L2, dtype=float)
    dl = np.asarray(dl, dtype=float)
    if np.any(np.abs(L1) > 90) or np.any(np.abs(L2) > 90):
        raise ValueError("latitude outside [-90, 90]")
    dl = np.mod(dl + 180.0, 360.0) - 180.0
    return np.radians(L1), np.radians(L2), np.radians(dl)


def _coincident(L1, L2, dl):
    L1 = np.asarray(L1, dtype=float)
    L2 = np.asarray(L2, dtype=float)
    return (L1 == L2) & (np.mod(np.asarray(dl, dtype=float), 360.0) == 0.0)


def cov_kz(L1, L2, dl, op_matern: MaternParams, a, b=None,
           radius: float = EARTH_RADIUS_KM, psi_fn: PsiFn | None = None):
    """Covariance of ``A(L) dZ0/dL + B(L) dZ0/dl`` with ``Z0`` Matern in chordal distance.

    ``A = P(.; a)`` and ``B = P(.; b)`` (``b=None`` for B == 0).  The
    result is ``A1 A2 C_{L1 L2} - A1 B2 C_{L1 dl} + B1 A2 C_{dl L2} - B1 B2 C_{dl dl}``
    with ``C(L1, L2, dl) = K0(ch)``.
    """
    if not op_matern.nu > 1:
        raise ValueError("operator Matern needs nu > 1")
    L1r, L2r, dlr = _radians(L1, L2, dl)
    part = _t_partials(L1r, L2r, dlr, radius)
    s1, s2 = np.sin(L1r), np.sin(L2r)
    A1, A2 = legendre_series(a, s1), legendre_series(a, s2)
    B1 = B2 = None
    if b is not None:
        B1, B2 = legendre_series(b, s1), legendre_series(b, s2)
    d1, d2 = _operator_psi(part["t"], op_matern, psi_fn)
    out = _kz_terms(A1, B1, A2, B2, part, d1, d2)
    return out if np.ndim(out) else float(out)


def cov_k1(L1, L2, dl, params: ParamVector, radius: float = EARTH_RADIUS_KM,
           nugget: bool = True):
    """Rescaled Matern ``P(L1;k) P(L2;k) K0(ch)`` plus the nugget at coincident points."""
    d = chordal_distance(L1, L2, dl, radius)
    s1 = np.sin(np.radians(L1))
    s2 = np.sin(np.radians(L2))
    out = legendre_series(params.k, s1) * legendre_series(params.k, s2) * matern_cov(d, params.base)
    if nugget and params.eps:
        out = out + params.eps * _coincident(L1, L2, dl)
    return out if np.ndim(out) else float(out)


def covariance_no_nugget(spec: ModelSpec, params: ParamVector, L1r, L2r, dlr,
                         radius: float = EARTH_RADIUS_KM, psi_fn: PsiFn | None = None):
    """Full model covariance without the nugget, inputs already in radians.

    ``psi_fn(t, matern, max_order, min_order)`` may be supplied to share
    Matern evaluations across symmetric arguments.
    """
    fn = psi_fn or _psi_orders
    part = _t_partials(L1r, L2r, dlr, radius)
    s1, s2 = np.sin(L1r), np.sin(L2r)
    base = fn(part["t"], params.base, 0, 0)[0]
    out = legendre_series(params.k, s1) * legendre_series(params.k, s2) * base
    if spec.has_operator:
        d1, d2 = _operator_psi(part["t"], params.op_matern, fn)
        A1, A2 = legendre_series(params.a, s1), legendre_series(params.a, s2)
        B1 = B2 = None
        if spec.b_order is not None:
            B1, B2 = legendre_series(params.b, s1), legendre_series(params.b, s2)
        out = out + _kz_terms(A1, B1, A2, B2, part, d1, d2)
        if spec.c_order is not None:
            C1, C2 = legendre_series(params.c, s1), legendre_series(params.c, s2)
            out = out + _kz_terms(C1, None, C2, None, part, d1, d2)
    return out


def cov_eval(spec: ModelSpec, params: ParamVector, L1, L2, dl,
             radius: float = EARTH_RADIUS_KM, nugget: bool = True):
    """Covariance ``K(L1, L2, dl)`` of the model ``spec`` (degrees in, any broadcastable shape).

    Models without an operator term reduce to the rescaled Matern plus
    nugget; operator models add ``KZ``; models with a second copy add
    ``KZ`` for ``c`` with ``B == 0``.
    """
    spec = model_spec(spec)
    params.validate(spec)
    L1r, L2r, dlr = _radians(L1, L2, dl)
    out = covariance_no_nugget(spec, params, L1r, L2r, dlr, radius)
    if nugget and params.eps:
        out = out + params.eps * _coincident(L1, L2, dl)
    return out if np.ndim(out) else float(out)


def pole_check(a) -> bool:
    """True when ``sum(a) == 0`` (to 1e-12), i.e. ``A`` vanishes at the north pole."""
    return bool(abs(float(np.sum(check_coeffs(a)))) <= 1e-12)


def random_params(spec: ModelSpec, rng: np.random.Generator,
                  radius: float = EARTH_RADIUS_KM) -> ParamVector:
    """Draw well-conditioned admissible parameters; operator variance comparable to the base."""
    spec = model_spec(spec)
    d = {"alpha": rng.uniform(0.5, 2.0), "beta": rng.uniform(300.0, 3000.0),
         "nu": rng.uniform(0.4, 2.5), "eps": rng.uniform(0.05, 0.5)}
    for i in range(1, spec.rescale_order + 1):
        d[f"k{i}"] = rng.uniform(-0.4, 0.4)
    if spec.has_operator:
        beta1 = rng.uniform(300.0, 3000.0)
        nu1 = rng.uniform(1.2, 3.0)
        # -2 R^2 psi'(0) = alpha1 R^2 2^(nu1-2) Gamma(nu1-1) / beta1^2 sets the scale
        unit = radius ** 2 * 2.0 ** (nu1 - 2.0) * math.gamma(nu1 - 1.0) / beta1 ** 2
        d.update(alpha1=rng.uniform(0.2, 1.0) / unit, beta1=beta1, nu1=nu1)
        for i in range(1, spec.a_order + 1):
            d[f"a{i}"] = rng.uniform(-0.5, 0.5)
        if spec.b_order is not None:
            for i in range(spec.b_order + 1):
                d[f"b{i}"] = rng.uniform(-0.5, 0.5)
        if spec.c_order is not None:
            for i in range(spec.c_order + 1):
                d[f"c{i}"] = rng.uniform(-0.5, 0.5)
    return ParamVector.from_dict(spec, d)
