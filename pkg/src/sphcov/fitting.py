"""Maximum likelihood estimation, Hessian standard errors and profile likelihoods."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .covmodel import ModelSpec, ParamVector, model_spec
from .errors import IndefiniteBlockError, ParameterError
from .geometry import EARTH_RADIUS_KM, Field
from .spectral import loglik_fft

__all__ = [
    "FitResult",
    "HessianResult",
    "default_init",
    "scan_init",
    "fit_mle",
    "hessian_from_function",
    "hessian_se",
    "profile_loglik",
]

LOG_NAMES = frozenset({"alpha", "beta", "nu", "alpha1", "beta1"})
REL_TOL = 1e-8
STEP_TOL = 1e-6
TIE_TOL = 1e-12
COND_LIMIT = 1e10
_PENALTY = 1e300
_LOWER = {"alpha": 0.0, "beta": 0.0, "nu": 0.0, "eps": 0.0, "alpha1": 0.0,
          "beta1": 0.0, "nu1": 1.0}


@dataclass(frozen=True)
class _Transform:
    """Maps raw free parameters to an unconstrained vector and back."""

    names: tuple[str, ...]
    eps_floor: float

    def forward(self, raw: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.names))
        for i, (name, v) in enumerate(zip(self.names, raw)):
            if name in LOG_NAMES:
                out[i] = math.log(v)
            elif name == "eps":
                out[i] = math.log(max(v - self.eps_floor, self.eps_floor))
            elif name == "nu1":
                out[i] = math.log(v - 1.0)
            else:
                out[i] = v
        return out

    def inverse(self, theta: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.names))
        for i, (name, v) in enumerate(zip(self.names, theta)):
            if name in LOG_NAMES:
                out[i] = math.exp(min(v, 700.0))
            elif name == "eps":
                out[i] = self.eps_floor + math.exp(min(v, 700.0))
            elif name == "nu1":
                out[i] = 1.0 + math.exp(min(v, 700.0))
            else:
                out[i] = v
        return out


@dataclass(frozen=True, eq=False)
class HessianResult:
    names: tuple[str, ...]
    hessian: np.ndarray
    ses: dict[str, float]
    condition: float
    near_singular: bool
    implicated: tuple[str, ...]
    indefinite: bool


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of :func:`fit_mle`.

    ``ses`` maps each free parameter to its standard error on the raw
    scale, NaN where the Hessian gives no usable curvature.
    """

    spec: ModelSpec
    estimates: ParamVector
    loglik: float
    free_names: tuple[str, ...]
    ses: dict[str, float]
    hessian: np.ndarray | None
    converged: bool
    iterations: int
    grad_norm: float
    restarts: int
    trace: list[float] = field(repr=False)
    fixed: frozenset = frozenset()
    hessian_info: HessianResult | None = field(default=None, repr=False)


def default_init(field_: Field, spec: ModelSpec, radius: float = EARTH_RADIUS_KM) -> ParamVector:
    """Data-driven starting values.

    ``nu = 1`` with ``alpha`` the sample variance, ``beta`` ten latitude
    spacings, a nugget of a tenth of the variance and all polynomial
    coefficients zero; operator terms start small with ``beta1 = beta / 4``.
    """
    spec = model_spec(spec)
    z = np.asarray(field_.values)
    var = float(np.nanvar(z)) or 1.0
    beta = 10.0 * field_.grid.lat_spacing_km(radius)
    d = {"alpha": var, "beta": beta, "nu": 1.0, "eps": 0.1 * var}
    if spec.has_operator:
        d.update(alpha1=1e-6 * var, beta1=beta / 4.0, nu1=1.5)
    return ParamVector.from_dict(spec, d)


def scan_init(field_: Field, spec: ModelSpec, init: ParamVector,
              radius: float = EARTH_RADIUS_KM) -> ParamVector:
    """Coarse grid search over ``beta`` and ``nu`` around ``init``.

    ``beta`` runs over quarter decades from ``init.beta / 1000`` to
    ``3 init.beta`` and ``nu`` over ``{0.5, 1, 2}``, with the sill held at its
    starting value; ``beta1`` follows as ``beta / 4`` for operator models.
    Only parameters not listed in ``init.fixed`` are changed.
    """
    spec = model_spec(spec)
    free = set(spec.param_names()) - set(init.fixed)
    if "beta" not in free:
        return init
    base = init.as_dict(spec)
    sill = base["alpha"] * 2.0 ** (base["nu"] - 1.0) * math.gamma(base["nu"])
    betas = base["beta"] * 10.0 ** np.arange(-3.0, 0.51, 0.25)
    nus = [0.5, 1.0, 2.0] if "nu" in free else [base["nu"]]
    best, best_ll = init, -np.inf
    for nu in nus:
        for beta in betas:
            d = dict(base, beta=float(beta), nu=nu)
            if "alpha" in free:
                d["alpha"] = sill / (2.0 ** (nu - 1.0) * math.gamma(nu))
            if spec.has_operator and "beta1" in free:
                d["beta1"] = float(beta) / 4.0
            try:
                cand = ParamVector.from_dict(spec, d, fixed=init.fixed)
                ll = loglik_fft(field_, spec, cand, radius)
            except (ParameterError, IndefiniteBlockError, np.linalg.LinAlgError):
                continue
            if ll > best_ll + TIE_TOL:
                best, best_ll = cand, ll
    return best


def _free_names(spec: ModelSpec, params: ParamVector, fixed: Iterable[str]) -> tuple[str, ...]:
    fixed = set(params.fixed) | set(fixed)
    unknown = fixed - set(spec.param_names())
    if unknown:
        raise ParameterError(f"fixed names not in model {spec.label}: {sorted(unknown)}")
    return tuple(n for n in spec.param_names() if n not in fixed)


def _safe_loglik(field_: Field, spec: ModelSpec, params_from: Callable[[np.ndarray], ParamVector],
                 radius: float) -> Callable[[np.ndarray], float]:
    def f(raw: np.ndarray) -> float:
        try:
            val = loglik_fft(field_, spec, params_from(raw), radius)
        except (ParameterError, IndefiniteBlockError, np.linalg.LinAlgError, OverflowError):
            return -np.inf
        return val if np.isfinite(val) else -np.inf
    return f


def _central_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, f0: float,
                      h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = step
        fp, fm = f(x + e), f(x - e)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * step)
        elif np.isfinite(fp):
            g[i] = (fp - f0) / step
        elif np.isfinite(fm):
            g[i] = (f0 - fm) / step
    return g


class _Tracker:
    """Negative objective in transformed space that remembers the best point."""

    def __init__(self, loglik_raw, transform: _Transform):
        self.loglik_raw = loglik_raw
        self.transform = transform
        self.best_x: np.ndarray | None = None
        self.best = -np.inf
        self.trace: list[float] = []

    def loglik(self, theta: np.ndarray) -> float:
        try:
            raw = self.transform.inverse(theta)
        except (OverflowError, ValueError):
            return -np.inf
        val = self.loglik_raw(raw)
        if val > self.best + TIE_TOL:
            self.best, self.best_x = val, np.array(theta, dtype=float)
        return val

    def objective(self, theta: np.ndarray) -> float:
        val = self.loglik(theta)
        return -val if np.isfinite(val) else _PENALTY

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        f0 = self.loglik(theta)
        return -_central_gradient(self.loglik, np.asarray(theta, dtype=float), f0)

    def mark(self, *_args) -> None:
        self.trace.append(self.best)


def _optimize_from(tracker: _Tracker, theta0: np.ndarray, max_rounds: int,
                   maxiter: int) -> tuple[bool, int, float]:
    """Alternate simplex and quasi-Newton stages until the improvement stalls."""
    d = theta0.size
    x = theta0
    prev = tracker.loglik(x)
    if not np.isfinite(prev):
        raise ParameterError("log-likelihood is not finite at the starting values")
    tracker.mark()
    if d == 0:
        return True, 0, 0.0
    iterations = 0
    converged = False
    for _ in range(max_rounds):
        nm = minimize(tracker.objective, x, method="Nelder-Mead", callback=tracker.mark,
                      options={"maxiter": maxiter, "xatol": 1e-7, "fatol": 1e-10,
                               "adaptive": d > 4})
        iterations += int(nm.nit)
        x_nm = tracker.best_x
        bf = minimize(tracker.objective, x_nm, jac=tracker.gradient, method="BFGS",
                      callback=tracker.mark, options={"maxiter": maxiter, "gtol": 1e-6})
        iterations += int(bf.nit)
        x_new = tracker.best_x
        cur = tracker.best
        improvement = (cur - prev) / max(1.0, abs(cur))
        step = float(np.max(np.abs(x_new - x))) if d else 0.0
        x, prev = x_new, cur
        if improvement < REL_TOL and step < STEP_TOL:
            converged = True
            break
        if bf.success and improvement < REL_TOL:
            converged = True
            break
    grad = tracker.gradient(x) if d else np.zeros(0)
    return converged, iterations, float(np.linalg.norm(grad))


NUGGET_SHARES = (0.02, 0.3, 0.005, 0.6)


def _reshare_nugget(init: ParamVector, spec: ModelSpec, names: Sequence[str],
                    r: int) -> np.ndarray:
    """Free parameters of ``init`` with the nugget share of ``alpha + eps`` reset.

    Restart ``r`` uses ``NUGGET_SHARES[(r - 1) % len]``; the nugget boundary
    is a common local maximum and the simplex rarely escapes it.
    """
    d = init.as_dict(spec)
    if "eps" in names and "alpha" in names:
        share = NUGGET_SHARES[(r - 1) % len(NUGGET_SHARES)]
        total = d["alpha"] + d["eps"]
        d["alpha"], d["eps"] = (1.0 - share) * total, share * total
    return np.array([d[n] for n in names], dtype=float)


def fit_mle(field_: Field, spec: ModelSpec, init: ParamVector | str | None = None,
            fixed: Iterable[str] = (), restarts: int = 3, seed: int = 0,
            jitter: float = 0.2, max_rounds: int = 8, maxiter: int | None = None,
            compute_se: bool = True, scan: bool = True,
            radius: float = EARTH_RADIUS_KM) -> FitResult:
    """Maximise :func:`loglik_fft` over the free parameters of ``spec``.

    Parameters
    ----------
    field_ : Field
        Complete (imputed, de-meaned) observations.
    spec : ModelSpec or str
    init : ParamVector, ``"auto"`` or None
        Starting values; ``"auto"``/None uses :func:`default_init`, refined
        by :func:`scan_init` unless ``scan=False``.
    fixed : iterable of str
        Parameters held at their ``init`` value (in addition to ``init.fixed``).
    restarts : int
        Number of starts.  The first is ``init`` itself; later ones move the
        nugget share of ``alpha + eps`` through ``NUGGET_SHARES`` and add
        ``N(0, jitter**2)`` noise in the unconstrained coordinates.
    seed : int
        Seed for the jitter.

    Returns
    -------
    FitResult
        Best start by log-likelihood; ties within 1e-12 keep the earlier one.
    """
    spec = model_spec(spec)
    if init is None or (isinstance(init, str) and init == "auto"):
        init = default_init(field_, spec, radius).with_fixed(fixed)
        if scan:
            init = scan_init(field_, spec, init, radius)
    init.validate(spec)
    names = _free_names(spec, init, fixed)
    fixed_all = frozenset(set(spec.param_names()) - set(names))
    var = float(np.nanvar(np.asarray(field_.values))) or 1.0
    transform = _Transform(names, eps_floor=1e-10 * var)
    base = init.as_dict(spec)

    def params_from(raw: np.ndarray) -> ParamVector:
        d = dict(base)
        d.update(zip(names, (float(v) for v in raw)))
        return ParamVector.from_dict(spec, d, fixed=fixed_all)

    loglik_raw = _safe_loglik(field_, spec, params_from, radius)
    theta0 = transform.forward(init.to_array(spec, list(names)))
    maxiter = maxiter or max(400, 200 * len(names))
    rng = np.random.default_rng(seed)

    best: tuple | None = None
    total_trace: list[float] = []
    for r in range(max(1, restarts)):
        start = theta0
        if r > 0:
            start = transform.forward(_reshare_nugget(init, spec, names, r))
            start = start + rng.normal(0.0, jitter, theta0.size)
        tracker = _Tracker(loglik_raw, transform)
        if r > 0 and not np.isfinite(tracker.loglik(start)):
            continue
        tracker = _Tracker(loglik_raw, transform)
        conv, its, gnorm = _optimize_from(tracker, start, max_rounds, maxiter)
        total_trace.extend(tracker.trace)
        if best is None or tracker.best > best[0] + TIE_TOL:
            best = (tracker.best, tracker.best_x, conv, its, gnorm)
    assert best is not None
    _, theta, conv, its, gnorm = best
    estimates = params_from(transform.inverse(theta))
    loglik = loglik_fft(field_, spec, estimates, radius)
    ses: dict[str, float] = {n: float("nan") for n in names}
    hess = None
    info = None
    if compute_se and names:
        info = hessian_se(field_, spec, estimates, fixed_all, radius)
        ses, hess = info.ses, info.hessian
    return FitResult(spec=spec, estimates=estimates, loglik=float(loglik), free_names=names,
                     ses=ses, hessian=hess, converged=conv, iterations=its, grad_norm=gnorm,
                     restarts=max(1, restarts), trace=total_trace, fixed=fixed_all,
                     hessian_info=info)


def hessian_from_function(f: Callable[[np.ndarray], float], x, steps=None,
                          lower=None) -> np.ndarray:
    """Central-difference Hessian of ``f`` at ``x``.

    ``steps`` defaults to ``max(1e-4 |x_i|, 1e-6)``.  Exact for quadratics up
    to rounding.  Coordinates closer than 1.5 steps to their ``lower``
    bound are differenced about ``lower + 1.5 h`` instead, so that no
    evaluation leaves the domain.
    """
    x = np.array(x, dtype=float)
    d = x.size
    h = np.maximum(1e-4 * np.abs(x), 1e-6) if steps is None else np.asarray(steps, dtype=float)
    if lower is not None:
        lo = np.asarray(lower, dtype=float)
        x = np.where(x - h < lo + 0.5 * h, lo + 1.5 * h, x)
    f0 = f(x)
    H = np.empty((d, d))
    E = np.diag(h)
    for i in range(d):
        H[i, i] = (f(x + E[i]) - 2.0 * f0 + f(x - E[i])) / h[i] ** 2
        for j in range(i):
            val = (f(x + E[i] + E[j]) - f(x + E[i] - E[j])
                   - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


def _analyse_hessian(names: Sequence[str], H: np.ndarray) -> HessianResult:
    d = len(names)
    ses = {n: float("nan") for n in names}
    if not np.all(np.isfinite(H)):
        return HessianResult(tuple(names), H, ses, float("inf"), True, tuple(names), True)
    info = -H
    diag = np.abs(np.diag(info))
    scale = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    scaled = info * scale[:, None] * scale[None, :]
    lam, vec = np.linalg.eigh(scaled)
    abs_lam = np.abs(lam)
    cond = float(abs_lam.max() / abs_lam.min()) if abs_lam.min() > 0 else float("inf")
    near = cond > COND_LIMIT
    implicated: tuple[str, ...] = ()
    if near:
        v = vec[:, np.argmin(abs_lam)]
        implicated = tuple(n for n, w in zip(names, v) if abs(w) >= 0.3)
    tol = COND_LIMIT ** -1 * abs_lam.max()
    good = lam > tol
    indefinite = not bool(good.all())
    if good.any():
        Vg = vec[:, good]
        cov_scaled = (Vg / lam[good]) @ Vg.T
        var = np.diag(cov_scaled) * scale ** 2
        # directions with little or negative curvature invalidate the affected entries
        bad_load = (vec[:, ~good] ** 2).sum(axis=1) if indefinite else np.zeros(d)
        for i, n in enumerate(names):
            if bad_load[i] < 1e-2 and var[i] > 0:
                ses[n] = float(np.sqrt(var[i]))
    return HessianResult(tuple(names), H, ses, cond, near, implicated, indefinite)


def hessian_se(field_: Field, spec: ModelSpec, params: ParamVector,
               fixed: Iterable[str] = (), radius: float = EARTH_RADIUS_KM) -> HessianResult:
    """Observed-information standard errors on the raw scale.

    The Hessian of the log-likelihood is taken by central differences with
    steps ``max(1e-4 |theta_i|, 1e-6)``; standard errors are the square roots
    of the diagonal of ``inv(-H)``.  A condition number above 1e10 (after
    scaling ``-H`` to unit diagonal) is flagged and the parameters loading on
    the flattest direction are reported.
    """
    spec = model_spec(spec)
    names = _free_names(spec, params, fixed)
    base = params.as_dict(spec)

    def params_from(raw):
        d = dict(base)
        d.update(zip(names, (float(v) for v in raw)))
        return ParamVector.from_dict(spec, d)

    f = _safe_loglik(field_, spec, params_from, radius)
    lower = [_LOWER.get(n, -np.inf) for n in names]
    H = hessian_from_function(f, params.to_array(spec, list(names)), lower=lower)
    return _analyse_hessian(names, H)


def profile_loglik(field_: Field, spec: ModelSpec, params: ParamVector, target: str,
                   values: Sequence[float], fixed: Iterable[str] = (), restarts: int = 1,
                   radius: float = EARTH_RADIUS_KM, **fit_kw) -> np.ndarray:
    """Maximised log-likelihood with ``target`` held at each of ``values``.

    Points are visited outward from the one nearest ``params[target]``, each
    warm-started from its neighbour's optimum.  Failed points are NaN.
    """
    spec = model_spec(spec)
    if target not in spec.param_names():
        raise ParameterError(f"{target!r} is not a parameter of model {spec.label}")
    values = np.asarray(values, dtype=float)
    out = np.full(values.size, np.nan)
    if values.size == 0:
        return out
    order = np.argsort(values, kind="stable")
    centre = int(np.argmin(np.abs(values[order] - params.as_dict(spec)[target])))
    held = set(fixed) | {target}
    for path in (order[centre:], order[:centre][::-1]):
        start = params
        for idx in path:
            try:
                init = start.with_values(spec, {target: values[idx]})
                res = fit_mle(field_, spec, init, fixed=held, restarts=restarts,
                              compute_se=False, radius=radius, **fit_kw)
            except (ParameterError, IndefiniteBlockError, np.linalg.LinAlgError, ValueError):
                continue
            out[idx] = res.loglik
            start = res.estimates.with_fixed(params.fixed)
    return out
