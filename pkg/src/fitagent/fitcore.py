"""Nonlinear least-squares fitting of DSL models to datasets."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .datastore import Dataset
from .exprdsl import DomainError, Expr, evaluate_array, free_names, param_order, parse

LN10 = math.log(10.0)


class FitError(RuntimeError):
    pass


class NonFiniteModelError(FitError):
    pass


class SingularFitError(FitError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ParamModel:
    """An expression with one independent variable and named fit parameters.

    ``covariates`` names extra dataset columns bound per row, and
    ``constants`` binds fixed numbers (e.g. ``pi``). Both are parsed as
    variables, so they never become fit parameters.
    """

    expr: Expr
    variable: str
    params: tuple[str, ...]
    covariates: tuple[str, ...] = ()
    constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        vs, ps = free_names(self.expr)
        bound = {self.variable, *self.covariates, *self.constants}
        if not vs <= bound:
            raise ValueError(f"unbound variables in model: {sorted(vs - bound)}")
        if set(self.params) != ps or len(self.params) != len(ps):
            raise ValueError(f"params {self.params} do not match expression parameters {sorted(ps)}")
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "constants", dict(self.constants))

    @classmethod
    def from_source(cls, source: str, variable: str, covariates: Sequence[str] = (),
                    constants: Mapping[str, float] | None = None) -> "ParamModel":
        constants = dict(constants or {})
        expr = parse(source, {variable, *covariates, *constants})
        return cls(expr, variable, param_order(expr), tuple(covariates), constants)

    def theta_dict(self, theta) -> dict[str, float]:
        if isinstance(theta, Mapping):
            return {p: float(theta[p]) for p in self.params}
        return dict(zip(self.params, (float(t) for t in theta)))

    def bindings(self, data: Dataset) -> dict[str, np.ndarray]:
        env = {self.variable: data.x, **{k: v for k, v in self.constants.items()}}
        for c in self.covariates:
            if c not in data.extra:
                raise ValueError(f"dataset has no column bound to {c!r}")
            env[c] = data.extra[c]
        return env

    def predict(self, theta, data: Dataset) -> np.ndarray:
        return evaluate_array(self.expr, self.bindings(data), self.theta_dict(theta), n=data.n)


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    resnorm: float
    iterations: int
    converged: bool
    residuals: np.ndarray
    fit_space: str = "linear"
    history: tuple[float, ...] = ()
    message: str = ""


@dataclass(frozen=True)
class ValidationMetrics:
    r2: float
    adjusted_r2: float | None
    rmse: float
    r2_log: float | None
    rmse_log: float | None
    residuals: np.ndarray
    n: int
    p: int


def jacobian_fd(model: ParamModel, theta, data: Dataset) -> np.ndarray:
    """Central-difference Jacobian of the model predictions, shape (n, p)."""
    th = model.theta_dict(theta)
    J = np.empty((data.n, len(model.params)))
    for j, name in enumerate(model.params):
        h = max(1e-6 * abs(th[name]), 1e-12)
        try:
            up = model.predict({**th, name: th[name] + h}, data)
            dn = model.predict({**th, name: th[name] - h}, data)
        except DomainError as exc:
            raise NonFiniteModelError(f"non-finite model value while perturbing {name}: {exc}") from exc
        J[:, j] = (up - dn) / (2 * h)
    if not np.all(np.isfinite(J)):
        raise NonFiniteModelError("non-finite Jacobian entry")
    return J


def _residuals(model, theta, data, fit_space, logy):
    try:
        f = model.predict(theta, data)
    except DomainError as exc:
        where = f" at x={data.x[exc.index]:g}" if exc.index is not None else ""
        raise NonFiniteModelError(f"{exc}{where}") from exc
    if fit_space == "log10":
        if np.any(f <= 0):
            i = int(np.argmax(f <= 0))
            raise NonFiniteModelError(f"non-positive prediction at x={data.x[i]:g} in log10 fit")
        return logy - np.log10(f), f
    return data.y - f, f


def fit_lm(
    model: ParamModel,
    data: Dataset,
    init: Mapping[str, float],
    fit_space: str = "linear",
    max_iter: int = 200,
    tolerance: float = 1e-10,
) -> FitResult:
    """Levenberg-Marquardt minimization of the sum of squared residuals.

    Residuals are ``y - f`` (linear) or ``log10 y - log10 f`` (log10). The
    damping starts at 1e-3, is divided by 10 after an accepted step and
    multiplied by 10 after a rejected one. Running out of iterations is not
    an error: the best point so far comes back with ``converged=False``.
    """
    if fit_space not in ("linear", "log10"):
        raise ValueError(f"fit_space must be 'linear' or 'log10', got {fit_space!r}")
    missing = [p for p in model.params if p not in init]
    if missing:
        raise ValueError(f"no initial value for {', '.join(missing)}")
    theta = np.array([float(init[p]) for p in model.params])
    if not np.all(np.isfinite(theta)):
        raise ValueError("initial values must be finite")
    logy = None
    if fit_space == "log10":
        if np.any(data.y <= 0):
            raise ValueError("log10 fit needs all y > 0")
        logy = np.log10(data.y)

    r, f = _residuals(model, theta, data, fit_space, logy)
    S = float(r @ r)
    history = [S]
    lam = 1e-3
    it = 0
    converged = False
    message = "iteration budget exhausted"

    def jac(th, f):
        J = jacobian_fd(model, th, data)
        if fit_space == "log10":
            J = J / (f[:, None] * LN10)
        # residual is observed minus model
        return -J

    while it < max_iter:
        J = jac(theta, f)
        g = J.T @ r
        if S == 0.0 or np.linalg.norm(g) < tolerance:
            converged, message = True, "gradient below tolerance"
            break
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        it += 1
        while True:
            try:
                delta = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                if np.linalg.norm(delta) <= tolerance * (np.linalg.norm(theta) + tolerance):
                    converged, message = True, "step below tolerance"
                    break
                trial = theta + delta
                try:
                    r_new, f_new = _residuals(model, trial, data, fit_space, logy)
                    S_new = float(r_new @ r_new)
                except NonFiniteModelError:
                    S_new = math.inf
                if S_new < S:
                    rel = (S - S_new) / S
                    theta, r, f, S = trial, r_new, f_new, S_new
                    history.append(S)
                    lam = max(lam / 10, 1e-15)
                    if rel < tolerance:
                        converged, message = True, "relative decrease below tolerance"
                    break
            lam *= 10
            if lam > 1e16:
                raise SingularFitError("normal equations stayed singular after exhausting damping")
        if converged:
            break

    return FitResult(
        params=model.theta_dict(theta),
        resnorm=S,
        iterations=it,
        converged=converged,
        residuals=r.copy(),
        fit_space=fit_space,
        history=tuple(history),
        message=message,
    )


def loglog_linearize(data: Dataset) -> tuple[float, float]:
    """Ordinary least squares of log10 y on log10 x; returns ``(10**intercept, slope)``."""
    if np.any(data.x <= 0) or np.any(data.y <= 0):
        raise ValueError("log-log linearization needs all x > 0 and y > 0")
    u, v = np.log10(data.x), np.log10(data.y)
    du = u - u.mean()
    sxx = float(du @ du)
    if sxx == 0.0:
        raise ValueError("degenerate x: all values equal")
    slope = float(du @ (v - v.mean())) / sxx
    intercept = float(v.mean() - slope * u.mean())
    return 10.0 ** intercept, slope


def _r2(y, yhat) -> float:
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValidationError("zero variance in y: R^2 undefined")
    return 1.0 - float(((y - yhat) ** 2).sum()) / ss_tot


def validate(model: ParamModel, fit: FitResult, data: Dataset) -> ValidationMetrics:
    missing = [p for p in model.params if p not in fit.params]
    if missing:
        raise ValueError(f"fit has no value for {', '.join(missing)}")
    yhat = model.predict(fit.params, data)
    y = data.y
    n, p = data.n, len(model.params)
    res = y - yhat
    r2 = _r2(y, yhat)
    adj = 1 - (1 - r2) * (n - 1) / (n - p - 1) if n > p + 1 else None
    rmse = math.sqrt(float(res @ res) / n)
    r2_log = rmse_log = None
    if np.all(y > 0) and np.all(yhat > 0):
        ly, lf = np.log10(y), np.log10(yhat)
        try:
            r2_log = _r2(ly, lf)
        except ValidationError:
            r2_log = None
        rmse_log = math.sqrt(float(((ly - lf) ** 2).sum()) / n)
    return ValidationMetrics(r2, adj, rmse, r2_log, rmse_log, res, n, p)
