"""Latent shock regression: fixed-point estimation and multi-horizon forecasts.

The model regresses the dependent on F lags of a single latent process
x~ = X w, where w pools n observed explanatory variables.  The coefficient
on variable i at lag tau factorizes as beta_tau * w_i, so the full lag-block
coefficient vector is kron(beta, omega).  Estimation alternates two exact
conditional least-squares steps,

    beta  = [(I_F (x) w)' S_P (I_F (x) w)]^-1 (I_F (x) w)' S_Py
    omega = [(b (x) I_n)' S_P (b (x) I_n)]^-1 (b (x) I_n)' S_Py

with the intercept recovered as c = ybar - Pbar (beta (x) omega).  Variants
add the dependent's own first lag as an extra regressor and/or a first-order
moving-average residual term fitted by simplex maximum likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .design import LaggedDesign, WeightedMoments, weighted_moments
from .optim import OptimResult, SimplexOptions, hannan_rissanen, nelder_mead

RHO_CLAMP = 0.999
THETA_BOUND = 0.999


class SingularStepError(Exception):
    """A conditional least-squares step hit a singular Gram matrix."""

    def __init__(self, step: str, iteration: int):
        self.step = step
        self.iteration = iteration
        super().__init__(f"singular Gram matrix in {step}-step at iteration {iteration}")


class InsufficientHistoryError(Exception):
    """Prediction requested without enough latent-series history."""


@dataclass(frozen=True)
class LsrConfig:
    """Estimation settings for one latent-regression fit."""

    F: int
    tol: float = 1e-10
    max_fp_iters: int = 1000
    include_ar_term: bool = False
    ma1: bool = False
    ml_opts: SimplexOptions = field(default_factory=SimplexOptions)

    def __post_init__(self) -> None:
        if self.F < 1:
            raise ValueError("F must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class LsrFit:
    """Fitted latent-regression parameters in canonical form.

    ``omega`` has unit Euclidean norm with a positive first nonzero entry;
    ``beta`` carries all scale.  ``rho`` and ``xtilde_mean`` describe the
    fitted latent series and are attached after the fixed point converges.
    """

    c: float
    beta: np.ndarray
    omega: np.ndarray
    rho: float
    theta: float | None
    ar: float | None
    xtilde_mean: float
    iterations: int
    converged: bool
    objective: float
    objective_path: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def F(self) -> int:
        return len(self.beta)

    def parameter_count(self) -> int:
        """Free parameters per forecast profile: 2 + n + F plus AR/MA extras."""
        count = 2 + self.n + self.F
        if self.ar is not None:
            count += 1
        if self.theta is not None:
            count += 1
        return count

    def coefficient_vector(self) -> np.ndarray:
        """Flat lag-block coefficients kron(beta, omega)."""
        return np.kron(self.beta, self.omega)


def fit_to_dict(fit: LsrFit) -> dict:
    """JSON-ready document with fields matching the fit exactly."""
    return {
        "kind": "lsr",
        "c": fit.c,
        "beta": [float(b) for b in fit.beta],
        "omega": [float(w) for w in fit.omega],
        "rho": fit.rho,
        "theta": fit.theta,
        "ar": fit.ar,
        "xtilde_mean": fit.xtilde_mean,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "objective": fit.objective,
    }


def fit_from_dict(doc: dict) -> LsrFit:
    if doc.get("kind") != "lsr":
        raise ValueError(f"not a latent-regression fit document: {doc.get('kind')!r}")
    return LsrFit(
        c=float(doc["c"]),
        beta=np.asarray(doc["beta"], dtype=float),
        omega=np.asarray(doc["omega"], dtype=float),
        rho=float(doc["rho"]),
        theta=None if doc["theta"] is None else float(doc["theta"]),
        ar=None if doc["ar"] is None else float(doc["ar"]),
        xtilde_mean=float(doc["xtilde_mean"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        objective=float(doc["objective"]),
    )


def lsr_objective(m: WeightedMoments, beta, omega) -> float:
    """Weighted least-squares objective with the intercept concentrated out.

    Returns Sigma_y - 2 g' Sigma_Py + g' Sigma_P g for g = kron(beta, omega);
    extra design columns (the AR term) are not part of this plain form.
    """
    if m.n_extra:
        raise ValueError("plain objective is defined on the latent block only")
    g = np.kron(np.asarray(beta, dtype=float), np.asarray(omega, dtype=float))
    return float(m.Sigma_y - 2.0 * g @ m.Sigma_Py + g @ m.Sigma_P @ g)


def _objective_full(m: WeightedMoments, g: np.ndarray) -> float:
    return float(m.Sigma_y - 2.0 * g @ m.Sigma_Py + g @ m.Sigma_P @ g)


def _canonicalize(beta: np.ndarray, omega: np.ndarray):
    """Unit-norm omega with positive leading entry; beta absorbs the scale."""
    norm = float(np.linalg.norm(omega))
    if norm == 0.0:
        return beta, omega
    nz = np.nonzero(omega)[0]
    sign = 1.0 if omega[nz[0]] > 0 else -1.0
    scale = norm * sign
    return beta * scale, omega / scale


def _expand(A: np.ndarray, n_extra: int) -> np.ndarray:
    """Block-diagonal extension mapping (block coefs, extras) to full columns."""
    if n_extra == 0:
        return A
    rows, cols = A.shape
    M = np.zeros((rows + n_extra, cols + n_extra))
    M[:rows, :cols] = A
    M[rows:, cols:] = np.eye(n_extra)
    return M


def _conditional_step(m: WeightedMoments, A: np.ndarray, step: str, iteration: int):
    M = _expand(A, m.n_extra)
    G = M.T @ m.Sigma_P @ M
    b = M.T @ m.Sigma_Py
    try:
        coef = np.linalg.solve(G, b)
    except np.linalg.LinAlgError as exc:
        raise SingularStepError(step, iteration) from exc
    if not np.all(np.isfinite(coef)):
        raise SingularStepError(step, iteration)
    k = A.shape[1]
    return coef[:k], coef[k:]


def _fit_fixed_point(m: WeightedMoments, n: int, F: int, cfg: LsrConfig) -> LsrFit:
    if m.Sigma_P.shape[0] != n * F + m.n_extra:
        raise ValueError("moment dimensions do not match n, F and the extra columns")
    omega = np.full(n, 1.0 / math.sqrt(n))
    beta = np.zeros(F)
    extras = np.zeros(m.n_extra)
    path = []
    converged = False
    iterations = 0
    for it in range(1, cfg.max_fp_iters + 1):
        iterations = it
        prev = (beta.copy(), omega.copy(), extras.copy())
        A_beta = np.kron(np.eye(F), omega[:, None])
        beta, extras = _conditional_step(m, A_beta, "beta", it)
        A_omega = np.kron(beta[:, None], np.eye(n))
        omega, extras = _conditional_step(m, A_omega, "omega", it)
        beta, omega = _canonicalize(beta, omega)
        g = np.concatenate([np.kron(beta, omega), extras])
        path.append(_objective_full(m, g))
        delta = max(
            float(np.max(np.abs(beta - prev[0]))),
            float(np.max(np.abs(omega - prev[1]))),
            float(np.max(np.abs(extras - prev[2]))) if m.n_extra else 0.0,
        )
        if it > 1 and delta < cfg.tol:
            converged = True
            break
    g = np.concatenate([np.kron(beta, omega), extras])
    c = float(m.ybar - m.Pbar @ g)
    return LsrFit(
        c=c,
        beta=beta,
        omega=omega,
        rho=0.0,
        theta=None,
        ar=float(extras[0]) if m.n_extra else None,
        xtilde_mean=0.0,
        iterations=iterations,
        converged=converged,
        objective=path[-1],
        objective_path=tuple(path),
    )


def lsr_fit(m: WeightedMoments, n: int, F: int, cfg: LsrConfig) -> LsrFit:
    """Plain latent regression solved by fixed-point iteration.

    Starts from the uniform unit vector for omega, alternates the two
    conditional least-squares steps, renormalizes after each sweep, and stops
    when the largest parameter change drops below ``cfg.tol``.
    """
    if m.n_extra:
        raise ValueError("plain fit expects moments without extra columns")
    return _fit_fixed_point(m, n, F, cfg)


def lsr_fit_ar(m: WeightedMoments, n: int, F: int, cfg: LsrConfig) -> LsrFit:
    """Latent regression with the dependent's first lag as an extra regressor.

    The lag enters outside the latent block, with its scalar coefficient
    re-estimated jointly inside both conditional steps.
    """
    if m.n_extra != 1:
        raise ValueError("AR fit expects moments with the dependent-lag column")
    return _fit_fixed_point(m, n, F, cfg)


def _ma_residuals(
    y: np.ndarray,
    P: np.ndarray,
    ylag: np.ndarray | None,
    c: float,
    g: np.ndarray,
    ar: float,
    theta: float,
) -> np.ndarray:
    """Recursive residuals of the MA(1)-adjusted model with eps_0 = 0."""
    base = y - c - P @ g
    if ylag is not None:
        base = base - ar * ylag
    eps = np.empty_like(base)
    prev = 0.0
    for t in range(len(base)):
        prev = base[t] - theta * prev
        eps[t] = prev
    return eps


def lsr_fit_ma(design: LaggedDesign, weights: np.ndarray, cfg: LsrConfig) -> LsrFit:
    """Latent regression with MA(1) residuals by weighted Gaussian likelihood.

    Initial values come from the moment-based fixed point (with the AR term
    when configured) and a Hannan-Rissanen pass over its residuals; the full
    parameter vector is then refined with Nelder-Mead under the configured
    iteration cap.  theta is confined to (-1, 1) by an infinite penalty.
    """
    if not cfg.ma1:
        raise ValueError("lsr_fit_ma requires cfg.ma1 = True")
    n, F = design.n, design.F
    if design.s <= n + F + 3:
        raise ValueError("too few rows for an MA(1)-adjusted fit")
    if cfg.include_ar_term != (design.y_lag1 is not None):
        raise ValueError("AR term setting does not match the design's dependent-lag column")
    m = weighted_moments(design, weights)
    base = _fit_fixed_point(m, n, F, cfg)
    w = m.weights
    g0 = base.coefficient_vector()
    resid0 = design.y - base.c - design.P @ g0
    if cfg.include_ar_term:
        resid0 = resid0 - base.ar * design.y_lag1
    try:
        theta0 = float(np.clip(hannan_rissanen(resid0, 0, 1).ma[0], -0.9, 0.9))
    except ValueError:
        theta0 = 0.0

    has_ar = cfg.include_ar_term
    ylag = design.y_lag1 if has_ar else None

    def unpack(x: np.ndarray):
        c = x[0]
        beta = x[1 : 1 + F]
        omega = x[1 + F : 1 + F + n]
        ar = x[1 + F + n] if has_ar else 0.0
        theta = x[-1]
        return c, beta, omega, ar, theta

    def objective(x: np.ndarray) -> float:
        c, beta, omega, ar, theta = unpack(x)
        if abs(theta) >= THETA_BOUND:
            return math.inf
        eps = _ma_residuals(design.y, design.P, ylag, c, np.kron(beta, omega), ar, theta)
        return float(w @ (eps * eps))

    x0 = np.concatenate(
        [
            [base.c],
            base.beta,
            base.omega,
            [base.ar] if has_ar else [],
            [theta0],
        ]
    )
    result: OptimResult = nelder_mead(objective, x0, cfg.ml_opts)
    c, beta, omega, ar, theta = unpack(result.x_min)
    beta, omega = _canonicalize(beta.copy(), omega.copy())
    return LsrFit(
        c=float(c),
        beta=beta,
        omega=omega,
        rho=0.0,
        theta=float(theta),
        ar=float(ar) if has_ar else None,
        xtilde_mean=0.0,
        iterations=result.iterations,
        converged=result.converged,
        objective=result.f_min,
        objective_path=(result.f_min,),
    )


def latent_series(X, omega) -> np.ndarray:
    """Pointwise latent values x~_t = X_t . omega."""
    X = np.asarray(X, dtype=float)
    return X @ np.asarray(omega, dtype=float)


def estimate_rho(xtilde, weights) -> float:
    """Weighted first-order autocorrelation of the latent series.

    Clamped to [-0.999, 0.999]; a zero-variance series returns 0 by
    convention.
    """
    x = np.asarray(xtilde, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 latent observations")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    mean = float(w @ x)
    dev = x - mean
    var = float(w @ (dev * dev))
    if var <= 1e-14 * (1.0 + mean * mean):
        return 0.0
    cov = float(np.sum(w[1:] * dev[1:] * dev[:-1]))
    return float(np.clip(cov / var, -RHO_CLAMP, RHO_CLAMP))


def attach_latent_stats(fit: LsrFit, X, weights) -> LsrFit:
    """Fill in rho and the latent mean from the final fitted series.

    rho is estimated after the fixed point converges rather than jointly;
    the mean is taken under the same sample weights as the fit.
    """
    xt = latent_series(X, fit.omega)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return replace(fit, rho=estimate_rho(xt, w), xtilde_mean=float(w @ xt))


def lsr_predict(fit: LsrFit, X_hist, y_hist, f: int) -> float:
    """Forecast the dependent ``f`` quarters past the end of the history.

    Latent lags already observed at the origin enter directly; future latent
    values are extrapolated as rho^(f-tau) x~_t + (1 - rho^(f-tau)) * mean.
    With an AR term, the dependent's future lags chain through the
    lower-horizon predictions; an MA term contributes theta * eps_t at the
    one-step horizon only.
    """
    if not 1 <= f <= fit.F:
        raise ValueError(f"horizon must lie in 1..{fit.F}")
    X_hist = np.asarray(X_hist, dtype=float)
    y_hist = np.asarray(y_hist, dtype=float)
    T = len(y_hist)
    if X_hist.shape[0] != T:
        raise ValueError("X and y histories must share the same period grid")
    if T < fit.F:
        raise InsufficientHistoryError(
            f"need at least F={fit.F} aligned periods, have {T}"
        )
    xt = latent_series(X_hist, fit.omega)

    eps_t = 0.0
    if fit.theta is not None:
        ar = fit.ar if fit.ar is not None else 0.0
        prev = 0.0
        for t in range(fit.F, T):
            yhat = fit.c + sum(fit.beta[tau - 1] * xt[t - tau] for tau in range(1, fit.F + 1))
            yhat += ar * y_hist[t - 1]
            prev = y_hist[t] - yhat - fit.theta * prev
        eps_t = prev

    preds: dict[int, float] = {}
    for h in range(1, f + 1):
        acc = fit.c
        for tau in range(1, fit.F + 1):
            if tau >= h:
                acc += fit.beta[tau - 1] * xt[T - 1 + h - tau]
            else:
                decay = fit.rho ** (h - tau)
                acc += fit.beta[tau - 1] * (decay * xt[T - 1] + (1.0 - decay) * fit.xtilde_mean)
        if fit.ar is not None:
            acc += fit.ar * (y_hist[T - 1] if h == 1 else preds[h - 1])
        if fit.theta is not None and h == 1:
            acc += fit.theta * eps_t
        preds[h] = float(acc)
    return preds[f]
