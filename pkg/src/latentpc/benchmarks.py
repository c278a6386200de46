"""Traditional regression benchmarks and univariate reference models.

Direct-forecast kinds (X, ARX, MAX, ARMAX) fit one regression per horizon,
using only time-t regressors so no future explanatory values are ever
needed.  Univariate kinds (EWMA, AR, MA1, ARMA11) model the dependent alone
and iterate forward recursively.  All fits use the same exponentially
decaying sample weights as the latent-regression models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .design import InsufficientDataError
from .optim import SimplexOptions, hannan_rissanen, nelder_mead

UNIVARIATE_KINDS = ("EWMA", "AR", "MA1", "ARMA11")
DIRECT_KINDS = ("X", "ARX", "MAX", "ARMAX")
PARAM_BOUND = 0.999


class SingularDesignError(Exception):
    """Rank-deficient regression design."""


@dataclass(frozen=True)
class BenchFit:
    """Fitted benchmark parameters; ``horizon`` is set for direct kinds only.

    ``eps_last`` stores the final in-sample recursive residual of MA-bearing
    fits, which is the only residual a forecast may legitimately use.
    """

    kind: str
    horizon: int | None
    coefficients: dict[str, float]
    converged: bool
    order: int = 0
    eps_last: float = 0.0

    def n_coefficients(self) -> int:
        return len(self.coefficients)


def bench_fit_to_dict(fit: BenchFit) -> dict:
    return {
        "kind": fit.kind,
        "horizon": fit.horizon,
        "coefficients": {k: float(v) for k, v in fit.coefficients.items()},
        "converged": fit.converged,
        "order": fit.order,
        "eps_last": fit.eps_last,
    }


def bench_fit_from_dict(doc: dict) -> BenchFit:
    return BenchFit(
        kind=doc["kind"],
        horizon=doc["horizon"],
        coefficients={k: float(v) for k, v in doc["coefficients"].items()},
        converged=bool(doc["converged"]),
        order=int(doc.get("order", 0)),
        eps_last=float(doc.get("eps_last", 0.0)),
    )


@dataclass(frozen=True)
class DirectDesign:
    """Rows for a horizon-tau direct regression: y_{t+tau} on time-t data."""

    y: np.ndarray
    X: np.ndarray
    y_lags: np.ndarray
    periods: tuple[int, ...]
    horizon: int

    @property
    def s(self) -> int:
        return len(self.y)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def p(self) -> int:
        return self.y_lags.shape[1]


def build_direct_design(
    x_vars: Sequence[Mapping[int, float]],
    dependent: Mapping[int, float],
    tau: int,
    p: int = 0,
) -> DirectDesign:
    """Align y_{t+tau} with current regressors x_{i,t} and p lags of y."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    n = len(x_vars)
    rows, lag_rows, y_out, periods = [], [], [], []
    for t in sorted(dependent):
        if (t + tau) not in dependent:
            continue
        x_row = [xv.get(t) for xv in x_vars]
        if any(v is None for v in x_row):
            continue
        lags = [dependent.get(t - j) for j in range(p)]
        if any(v is None for v in lags):
            continue
        rows.append(x_row)
        lag_rows.append(lags)
        y_out.append(dependent[t + tau])
        periods.append(t)
    if not rows:
        raise InsufficientDataError(f"no usable rows for direct horizon {tau}")
    return DirectDesign(
        y=np.asarray(y_out, dtype=float),
        X=np.asarray(rows, dtype=float),
        y_lags=np.asarray(lag_rows, dtype=float).reshape(len(rows), p),
        periods=tuple(periods),
        horizon=tau,
    )


def _weighted_ols(y: np.ndarray, X: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    if rank < X.shape[1]:
        raise SingularDesignError(f"design rank {rank} < {X.shape[1]} columns")
    return coef


def _css_residuals(base: np.ndarray, theta: float) -> np.ndarray:
    eps = np.empty_like(base)
    prev = 0.0
    for t in range(len(base)):
        prev = base[t] - theta * prev
        eps[t] = prev
    return eps


def fit_direct(
    design: DirectDesign,
    weights: np.ndarray,
    kind: str,
    ml_opts: SimplexOptions | None = None,
) -> BenchFit:
    """Fit one direct-forecast regression at the design's horizon.

    X/ARX use weighted least squares; MAX/ARMAX add an MA(1) residual term
    seeded by Hannan-Rissanen and refined with Nelder-Mead.
    """
    if kind not in DIRECT_KINDS:
        raise ValueError(f"unknown direct kind {kind!r}")
    p = design.p
    if kind in ("X", "MAX") and p != 0:
        raise ValueError(f"{kind} takes no dependent lags")
    if kind == "ARMAX" and p != 1:
        raise ValueError("ARMAX is defined with one dependent lag")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    Z = np.column_stack([np.ones(design.s), design.X, design.y_lags])
    coef = _weighted_ols(design.y, Z, w)
    names = (
        ["c"]
        + [f"beta_{i}" for i in range(design.n)]
        + [f"phi_{j + 1}" for j in range(p)]
    )
    coefficients = dict(zip(names, (float(v) for v in coef)))
    if kind in ("X", "ARX"):
        return BenchFit(kind, design.horizon, coefficients, converged=True, order=p)

    resid = design.y - Z @ coef
    try:
        theta0 = float(np.clip(hannan_rissanen(resid, 0, 1).ma[0], -0.9, 0.9))
    except ValueError:
        theta0 = 0.0

    def objective(x: np.ndarray) -> float:
        theta = x[-1]
        if abs(theta) >= PARAM_BOUND:
            return math.inf
        eps = _css_residuals(design.y - Z @ x[:-1], theta)
        return float(w @ (eps * eps))

    result = nelder_mead(objective, np.concatenate([coef, [theta0]]), ml_opts)
    xm = result.x_min
    coefficients = dict(zip(names, (float(v) for v in xm[:-1])))
    coefficients["theta"] = float(xm[-1])
    eps = _css_residuals(design.y - Z @ xm[:-1], xm[-1])
    return BenchFit(
        kind,
        design.horizon,
        coefficients,
        converged=result.converged,
        order=p,
        eps_last=float(eps[-1]),
    )


def fit_univariate(
    y,
    weights: np.ndarray,
    kind: str,
    order: int = 1,
    ml_opts: SimplexOptions | None = None,
) -> BenchFit:
    """Fit a univariate reference model on the dependent series alone.

    EWMA is the weighted sample mean (the rolling-mean model under
    exponentially decaying weights); AR(p) is weighted least squares; MA1 and
    ARMA11 are conditional-sum-of-squares maximum likelihood.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    if len(y) != len(w):
        raise ValueError("weights must align with the series")
    if kind == "EWMA":
        return BenchFit("EWMA", None, {"c": float(w @ y)}, converged=True)
    if kind == "AR":
        p = order
        if len(y) <= p + 2:
            raise InsufficientDataError(f"series too short for AR({p})")
        rows = len(y) - p
        Z = np.ones((rows, 1 + p))
        for j in range(1, p + 1):
            Z[:, j] = y[p - j : len(y) - j]
        coef = _weighted_ols(y[p:], Z, w[p:])
        coefficients = {"c": float(coef[0])}
        coefficients.update({f"phi_{j}": float(coef[j]) for j in range(1, p + 1)})
        return BenchFit("AR", None, coefficients, converged=True, order=p)
    if kind not in ("MA1", "ARMA11"):
        raise ValueError(f"unknown univariate kind {kind!r}")

    p = 1 if kind == "ARMA11" else 0
    if len(y) <= p + 3:
        raise InsufficientDataError(f"series too short for {kind}")
    try:
        init = hannan_rissanen(y, p, 1)
        ar0 = init.ar if p else np.zeros(0)
        theta0 = float(np.clip(init.ma[0], -0.9, 0.9))
        c0 = init.c
    except ValueError:
        ar0, theta0, c0 = np.zeros(p), 0.0, float(np.mean(y))
    ar0 = np.clip(ar0, -0.9, 0.9)

    ys = y[p:]
    ws = w[p:]
    ylag = y[:-1] if p else None

    def objective(x: np.ndarray) -> float:
        c, theta = x[0], x[-1]
        if abs(theta) >= PARAM_BOUND:
            return math.inf
        base = ys - c
        if p:
            phi = x[1]
            if abs(phi) >= PARAM_BOUND:
                return math.inf
            base = base - phi * ylag
        eps = _css_residuals(base, theta)
        return float(ws @ (eps * eps))

    x0 = np.concatenate([[c0], ar0, [theta0]])
    result = nelder_mead(objective, x0, ml_opts)
    xm = result.x_min
    coefficients = {"c": float(xm[0])}
    if p:
        coefficients["phi_1"] = float(xm[1])
    coefficients["theta"] = float(xm[-1])
    base = ys - xm[0] - (xm[1] * ylag if p else 0.0)
    eps = _css_residuals(base, xm[-1])
    return BenchFit(
        kind, None, coefficients, converged=result.converged, order=p,
        eps_last=float(eps[-1]),
    )


def bench_predict(
    fit: BenchFit,
    y_hist,
    x_now=None,
    f: int = 1,
) -> float:
    """Forecast ``f`` steps ahead from the end of the dependent history.

    Direct kinds apply their horizon's fit to the time-t regressors (the fit
    horizon must equal ``f``); univariate AR/ARMA kinds iterate recursively;
    the MA term contributes only at the one-step horizon.
    """
    y_hist = np.asarray(y_hist, dtype=float)
    co = fit.coefficients
    if fit.kind == "EWMA":
        return co["c"]
    if fit.kind == "AR":
        p = fit.order
        if len(y_hist) < p:
            raise InsufficientDataError(f"need {p} observations for AR({p})")
        window = list(y_hist[-p:][::-1])
        val = y_hist[-1]
        for _ in range(f):
            val = co["c"] + sum(co[f"phi_{j + 1}"] * window[j] for j in range(p))
            window = [val] + window[:-1]
        return float(val)
    if fit.kind == "MA1":
        return float(co["c"] + co["theta"] * fit.eps_last) if f == 1 else co["c"]
    if fit.kind == "ARMA11":
        if len(y_hist) < 1:
            raise InsufficientDataError("need one observation for ARMA(1,1)")
        val = y_hist[-1]
        for h in range(1, f + 1):
            val = co["c"] + co["phi_1"] * val + (co["theta"] * fit.eps_last if h == 1 else 0.0)
        return float(val)
    if fit.kind in DIRECT_KINDS:
        if fit.horizon != f:
            raise ValueError(f"direct fit is for horizon {fit.horizon}, not {f}")
        if x_now is None:
            raise ValueError("direct kinds need the time-t regressor vector")
        x_now = np.asarray(x_now, dtype=float)
        acc = co["c"] + sum(co[f"beta_{i}"] * x_now[i] for i in range(len(x_now)))
        p = fit.order
        if p:
            if len(y_hist) < p:
                raise InsufficientDataError(f"need {p} dependent lags")
            acc += sum(co[f"phi_{j + 1}"] * y_hist[-1 - j] for j in range(p))
        if fit.kind in ("MAX", "ARMAX") and f == 1:
            acc += co["theta"] * fit.eps_last
        return float(acc)
    raise ValueError(f"unknown kind {fit.kind!r}")
