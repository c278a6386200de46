"""Nelder-Mead simplex minimizer and the Hannan-Rissanen ARMA initializer.

Both routines are deterministic: the simplex is seeded from the start point
plus a fixed per-coordinate step, and the long-AR order in Hannan-Rissanen
is a fixed function of the sample size.  Every maximum-likelihood model fit
in this package funnels through these two functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SeedError(Exception):
    """The objective is non-finite at the requested start point."""


@dataclass(frozen=True)
class SimplexOptions:
    """Nelder-Mead settings; the iteration cap defaults to the 10,000 hard limit."""

    max_iters: int = 10_000
    x_tol: float = 1e-8
    f_tol: float = 1e-10
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_step: float = 0.1

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.reflection <= 0 or self.expansion <= 1:
            raise ValueError("need reflection > 0 and expansion > 1")
        if not (0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("contraction and shrink must lie in (0, 1)")


@dataclass(frozen=True)
class OptimResult:
    x_min: np.ndarray
    f_min: float
    iterations: int
    converged: bool


def nelder_mead(objective, x0, opts: SimplexOptions | None = None) -> OptimResult:
    """Minimize ``objective`` from ``x0`` with the standard simplex moves.

    Non-finite objective values are treated as +inf so penalty-constrained
    likelihoods remain usable.  Terminates once the simplex diameter falls
    below ``x_tol`` and the function spread below ``f_tol`` (both, since a
    simplex straddling a minimum can have a tiny f-spread while still far
    from it), or at the iteration cap, in which case ``converged`` is False.
    """
    opts = opts or SimplexOptions()

    def f(x: np.ndarray) -> float:
        v = objective(x)
        v = float(v)
        return v if math.isfinite(v) else math.inf

    x0 = np.asarray(x0, dtype=float)
    f0 = f(x0)
    if not math.isfinite(f0):
        raise SeedError("objective is non-finite at the start point")
    dim = len(x0)
    verts = [x0.copy()]
    for i in range(dim):
        v = x0.copy()
        v[i] += opts.initial_step
        verts.append(v)
    fvals = [f0] + [f(v) for v in verts[1:]]

    iterations = 0
    converged = False
    while iterations < opts.max_iters:
        order = sorted(range(dim + 1), key=lambda i: (fvals[i], i))
        verts = [verts[i] for i in order]
        fvals = [fvals[i] for i in order]
        best, worst = verts[0], verts[-1]
        diameter = max(float(np.max(np.abs(v - best))) for v in verts[1:])
        spread = fvals[-1] - fvals[0]
        if diameter < opts.x_tol and spread < opts.f_tol:
            converged = True
            break
        iterations += 1
        centroid = np.mean(verts[:-1], axis=0)
        xr = centroid + opts.reflection * (centroid - worst)
        fr = f(xr)
        if fr < fvals[0]:
            xe = centroid + opts.expansion * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                verts[-1], fvals[-1] = xe, fe
            else:
                verts[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            verts[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + opts.contraction * (xr - centroid)
            else:
                xc = centroid + opts.contraction * (worst - centroid)
            fc = f(xc)
            if fc < min(fr, fvals[-1]):
                verts[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, dim + 1):
                    verts[i] = verts[0] + opts.shrink * (verts[i] - verts[0])
                    fvals[i] = f(verts[i])

    i_best = min(range(dim + 1), key=lambda i: (fvals[i], i))
    return OptimResult(
        x_min=verts[i_best].copy(),
        f_min=fvals[i_best],
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True)
class ArmaInit:
    """Stage-two Hannan-Rissanen coefficients used to seed likelihood fits."""

    c: float
    ar: np.ndarray
    ma: np.ndarray
    sigma2: float
    fallback: bool = False


def _ols(y: np.ndarray, X: np.ndarray):
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    return coef, rank


def hannan_rissanen(y, p: int, q: int) -> ArmaInit:
    """Two-stage least-squares ARMA(p, q) initialization.

    Stage one fits a long autoregression (order floor(min(s/4,
    10*log10(s)))) to produce residual proxies; stage two regresses y on its
    own p lags and q lagged residual proxies.  A rank-deficient stage-two
    design falls back to zero MA terms with the ``fallback`` flag set.
    """
    y = np.asarray(y, dtype=float)
    s = len(y)
    long_order = int(min(s / 4, 10 * math.log10(s))) if s > 1 else 1
    long_order = max(long_order, p, q, 1)
    if s <= p + q + long_order + 1:
        raise ValueError(f"series too short for ARMA({p},{q}) initialization")
    if float(np.var(y)) < 1e-300:
        return ArmaInit(c=float(y[0]), ar=np.zeros(p), ma=np.zeros(q), sigma2=0.0)

    # Stage 1: long AR by least squares, residuals as innovation proxies.
    rows = s - long_order
    X1 = np.ones((rows, long_order + 1))
    for j in range(1, long_order + 1):
        X1[:, j] = y[long_order - j : s - j]
    y1 = y[long_order:]
    coef1, _ = _ols(y1, X1)
    eps = np.concatenate([np.zeros(long_order), y1 - X1 @ coef1])

    # Stage 2: y on its own lags and lagged residual proxies.
    start = long_order + max(p, q)
    rows2 = s - start
    X2 = np.ones((rows2, 1 + p + q))
    for j in range(1, p + 1):
        X2[:, j] = y[start - j : s - j]
    for j in range(1, q + 1):
        X2[:, p + j] = eps[start - j : s - j]
    y2 = y[start:]
    coef2, rank = _ols(y2, X2)
    if rank < X2.shape[1]:
        keep = X2[:, : 1 + p]
        coef_ar, _ = _ols(y2, keep)
        resid = y2 - keep @ coef_ar
        return ArmaInit(
            c=float(coef_ar[0]),
            ar=np.asarray(coef_ar[1:], dtype=float),
            ma=np.zeros(q),
            sigma2=float(np.mean(resid**2)),
            fallback=True,
        )
    resid = y2 - X2 @ coef2
    return ArmaInit(
        c=float(coef2[0]),
        ar=np.asarray(coef2[1 : 1 + p], dtype=float),
        ma=np.asarray(coef2[1 + p :], dtype=float),
        sigma2=float(np.mean(resid**2)),
    )
