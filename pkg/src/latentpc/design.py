"""Lagged design matrices and exponentially weighted sample moments.

The design matrix stacks lag blocks of all explanatory variables: column
block tau (tau = 1..F) holds the tau-period lag of every variable, so the
flat column index of variable i at lag tau is (tau - 1) * n + i.  All
estimators downstream consume the weighted moments of this matrix rather
than the raw rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Mapping, Sequence

import numpy as np

from .periods import quarter_end, years_between

PSD_TOL = 1e-10


class InsufficientDataError(Exception):
    """Not enough aligned rows to build the requested design."""


@dataclass(frozen=True)
class LaggedDesign:
    """Aligned dependent vector and lag-block matrix on a quarterly grid.

    ``y_lag1`` is populated when the dependent's own first lag is requested
    as an extra regressor outside the latent block.
    """

    y: np.ndarray
    P: np.ndarray
    n: int
    F: int
    period_index: tuple[int, ...]
    y_lag1: np.ndarray | None = None

    @property
    def s(self) -> int:
        return len(self.y)

    @property
    def n_extra(self) -> int:
        return 0 if self.y_lag1 is None else 1

    def period_dates(self) -> list[date]:
        return [quarter_end(k) for k in self.period_index]

    def full_matrix(self) -> np.ndarray:
        """Latent block plus any extra columns, in estimation order."""
        if self.y_lag1 is None:
            return self.P
        return np.column_stack([self.P, self.y_lag1])


@dataclass(frozen=True)
class WeightedMoments:
    """Weighted means and (co)variances consumed by the regression estimators.

    ``Sigma_P`` spans the latent block plus ``n_extra`` appended columns; the
    weights are normalized to sum to one, so all moments are on the same
    probability scale.
    """

    ybar: float
    Pbar: np.ndarray
    Sigma_P: np.ndarray
    Sigma_Py: np.ndarray
    Sigma_y: float
    weights: np.ndarray
    s: int
    half_life: float | None = None
    n_extra: int = 0

    def __post_init__(self) -> None:
        w = self.weights
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be normalized to sum to 1")
        sym = 0.5 * (self.Sigma_P + self.Sigma_P.T)
        scale = max(1.0, float(np.abs(sym).max()))
        if float(np.linalg.eigvalsh(sym).min()) < -PSD_TOL * scale:
            raise ValueError("Sigma_P is not positive semidefinite within tolerance")


def build_lagged_design(
    x_vars: Sequence[Mapping[int, float]],
    dependent: Mapping[int, float],
    F: int,
    include_y_lag: bool = False,
) -> LaggedDesign:
    """Assemble the complete-case design of y on lags 1..F of all variables.

    A row for quarter t is kept only when y_t and every x_{i,t-tau} for
    tau = 1..F exist (plus y_{t-1} when requested); incomplete rows are
    dropped rather than imputed.
    """
    if F < 1:
        raise ValueError("F must be >= 1")
    n = len(x_vars)
    if n < 1:
        raise ValueError("need at least one explanatory variable")
    rows = []
    periods = []
    y_out = []
    ylag_out = []
    for t in sorted(dependent):
        if include_y_lag and (t - 1) not in dependent:
            continue
        row = np.empty(n * F)
        ok = True
        for tau in range(1, F + 1):
            for i, xv in enumerate(x_vars):
                v = xv.get(t - tau)
                if v is None:
                    ok = False
                    break
                row[(tau - 1) * n + i] = v
            if not ok:
                break
        if not ok:
            continue
        rows.append(row)
        periods.append(t)
        y_out.append(dependent[t])
        if include_y_lag:
            ylag_out.append(dependent[t - 1])
    if not rows:
        raise InsufficientDataError(
            f"no usable rows for F={F} with {n} variables"
        )
    return LaggedDesign(
        y=np.asarray(y_out, dtype=float),
        P=np.vstack(rows),
        n=n,
        F=F,
        period_index=tuple(periods),
        y_lag1=np.asarray(ylag_out, dtype=float) if include_y_lag else None,
    )


def exp_weights(periods: Sequence[date], anchor: date, half_life_years: float) -> np.ndarray:
    """Exponentially decaying sample weights, normalized to sum to one.

    The raw weight of an observation aged ``a`` years (365.25-day years,
    measured from the anchor) is ``0.5 ** (a / half_life_years)``.
    """
    if half_life_years <= 0:
        raise ValueError("half_life_years must be positive")
    ages = np.array([years_between(anchor, p) for p in periods], dtype=float)
    if np.any(ages < 0):
        raise ValueError("anchor must not precede any sample period")
    raw = np.power(0.5, ages / half_life_years)
    return raw / raw.sum()


def weighted_moments(design: LaggedDesign, weights: np.ndarray) -> WeightedMoments:
    """Weighted means and centered second moments of the design.

    Normalized weights with no small-sample correction: the downstream fixed
    point is invariant to a common scalar on all moments, so only internal
    consistency matters.
    """
    w = np.asarray(weights, dtype=float)
    if len(w) != design.s:
        raise ValueError("weights length must match the number of rows")
    w = w / w.sum()
    Q = design.full_matrix()
    y = design.y
    ybar = float(w @ y)
    Pbar = w @ Q
    Qc = Q - Pbar
    yc = y - ybar
    Sigma_P = (Qc * w[:, None]).T @ Qc
    Sigma_P = 0.5 * (Sigma_P + Sigma_P.T)
    Sigma_Py = (Qc * w[:, None]).T @ yc
    Sigma_y = float(w @ (yc * yc))
    return WeightedMoments(
        ybar=ybar,
        Pbar=Pbar,
        Sigma_P=Sigma_P,
        Sigma_Py=Sigma_Py,
        Sigma_y=Sigma_y,
        weights=w,
        s=design.s,
        n_extra=design.n_extra,
    )
