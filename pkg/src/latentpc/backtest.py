"""Rolling out-of-sample backtest over a simulated release-date clock.

The clock visits each quarter twice (configurable) on the 1st and 15th of
the mid-quarter month.  At each visit a forecast profile is produced only if
(a) at least one new data release has arrived since the last visit that was
evaluated, (b) every explanatory variable is at least as recent as the
dependent, and (c) the in-sample degrees of freedom (usable rows minus
estimated coefficients) meet the configured minimum.  All fitting sees only
data released on or before the visit date.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .design import InsufficientDataError, build_lagged_design, exp_weights, weighted_moments
from .benchmarks import (
    bench_fit_to_dict,
    bench_predict,
    build_direct_design,
    fit_direct,
    fit_univariate,
)
from .lsr import (
    LsrConfig,
    attach_latent_stats,
    fit_to_dict,
    lsr_fit,
    lsr_fit_ar,
    lsr_fit_ma,
    lsr_predict,
)
from .optim import SimplexOptions
from .periods import quarter_end, quarter_key
from .specgen import FactorSpec
from .vintages import VariableDef, VintageSeries, variable_series

# methodology name -> (engine family, options)
LSR_METHODOLOGIES = {
    "LSR-AR0": {"ar": False, "ma": False},
    "LSR": {"ar": True, "ma": False},
    "LSR-MA1": {"ar": False, "ma": True},
    "LSR-ARMA11": {"ar": True, "ma": True},
}
DIRECT_METHODOLOGIES = {
    "X1": {"kind": "X", "p": 0},
    "ARX1": {"kind": "ARX", "p": 1},
    "ARX2": {"kind": "ARX", "p": 2},
    "ARX3": {"kind": "ARX", "p": 3},
    "ARX4": {"kind": "ARX", "p": 4},
    "MAX11": {"kind": "MAX", "p": 0},
    "ARMAX11": {"kind": "ARMAX", "p": 1},
}
UNIVARIATE_METHODOLOGIES = {
    "EWMA": {"kind": "EWMA", "p": 0},
    "AR1": {"kind": "AR", "p": 1},
    "AR2": {"kind": "AR", "p": 2},
    "AR3": {"kind": "AR", "p": 3},
    "AR4": {"kind": "AR", "p": 4},
    "MA1": {"kind": "MA1", "p": 0},
    "ARMA11": {"kind": "ARMA11", "p": 1},
}
ALL_METHODOLOGIES = tuple(
    list(LSR_METHODOLOGIES) + list(DIRECT_METHODOLOGIES) + list(UNIVARIATE_METHODOLOGIES)
)


@dataclass(frozen=True)
class BacktestConfig:
    min_df: int = 40
    half_life_years: float = 10.0
    horizons: int = 8
    clock_checks_per_quarter: int = 2
    start: date | None = None
    end: date | None = None
    realized_vintage: str = "latest"
    fp_tol: float = 1e-10
    max_fp_iters: int = 1000
    ml_opts: SimplexOptions = field(default_factory=SimplexOptions)

    def __post_init__(self) -> None:
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")
        if self.horizons < 1:
            raise ValueError("horizons must be >= 1")
        if self.realized_vintage not in ("latest", "first"):
            raise ValueError("realized_vintage must be 'latest' or 'first'")


@dataclass
class ForecastProfile:
    """One forecast profile: predictions per horizon from a single origin.

    ``base_period`` is the quarter key of the last dependent observation in
    the origin's information set; horizon f targets base_period + f.  All
    per-horizon maps cover only horizons whose fit met the df gate.
    """

    spec_id: str
    methodology: str
    origin: date
    base_period: int
    predictions: dict[int, float]
    realized: dict[int, float]
    model_df: dict[int, int]
    converged: dict[int, bool]
    fit_doc: dict | None = None


def methodology_family(name: str) -> str:
    if name in LSR_METHODOLOGIES:
        return "lsr"
    if name in DIRECT_METHODOLOGIES:
        return "direct"
    if name in UNIVARIATE_METHODOLOGIES:
        return "univariate"
    raise ValueError(f"unknown methodology {name!r}")


def lsr_coefficient_count(n: int, F: int, ar: bool, ma: bool) -> int:
    return 2 + n + F + (1 if ar else 0) + (1 if ma else 0)


def clock_dates(start: date, end: date, checks_per_quarter: int = 2) -> list[date]:
    """Release-check dates: evenly spaced days of each mid-quarter month."""
    if checks_per_quarter < 1:
        raise ValueError("checks_per_quarter must be >= 1")
    out = []
    k = quarter_key(start)
    k_end = quarter_key(end)
    while k <= k_end:
        year, q = divmod(k, 4)
        month = 3 * q + 2
        for j in range(checks_per_quarter):
            day = 1 + (28 * j) // checks_per_quarter
            d = date(year, month, day)
            if start <= d <= end:
                out.append(d)
        k += 1
    return out


def _store_release_span(store, series_ids):
    first, last = None, None
    for sid in series_ids:
        s = store[sid]
        fr, lr = s.first_release(), s.last_release()
        if fr is None:
            continue
        first = fr if first is None else min(first, fr)
        last = lr if last is None else max(last, lr)
    if first is None:
        raise InsufficientDataError("no releases in the store for the requested series")
    return first, last


def releases_visible(store, series_ids, d: date) -> int:
    return sum(store[sid].releases_on_or_before(d) for sid in series_ids)


def poison_after(
    store: dict[str, VintageSeries], cutoff: date, sentinel: float = 1e12
) -> dict[str, VintageSeries]:
    """Replace the value of every release dated after ``cutoff`` with a sentinel.

    A correct no-lookahead engine produces identical output at origins on or
    before the cutoff when run against the poisoned store.
    """
    out = {}
    for sid, series in store.items():
        obs = [
            (p, r, v if r <= cutoff else sentinel)
            for p, r, v in series.observations
        ]
        out[sid] = VintageSeries(sid, obs)
    return out


def _aligned_history(dep: dict[int, float], xs: list[dict[int, float]]):
    """Contiguous common grid of y and all x, ending at the last y period."""
    base = max(dep)
    if not all(base in x for x in xs):
        raise InsufficientDataError("regressor history does not reach the origin period")
    start = base
    while (start - 1) in dep and all((start - 1) in x for x in xs):
        start -= 1
    grid = list(range(start, base + 1))
    y_hist = np.array([dep[k] for k in grid])
    X_hist = np.array([[x[k] for x in xs] for k in grid])
    return grid, y_hist, X_hist


def _fit_lsr_profile(dep, xs, origin, cfg: BacktestConfig, options) -> tuple | None:
    F = cfg.horizons
    ar, ma = options["ar"], options["ma"]
    n = len(xs)
    try:
        design = build_lagged_design(xs, dep, F, include_y_lag=ar)
    except InsufficientDataError:
        return None
    n_coef = lsr_coefficient_count(n, F, ar, ma)
    df = design.s - n_coef
    if df < cfg.min_df:
        return None
    weights = exp_weights(design.period_dates(), origin, cfg.half_life_years)
    lcfg = LsrConfig(
        F=F,
        tol=cfg.fp_tol,
        max_fp_iters=cfg.max_fp_iters,
        include_ar_term=ar,
        ma1=ma,
        ml_opts=cfg.ml_opts,
    )
    if ma:
        fit = lsr_fit_ma(design, weights, lcfg)
    else:
        m = weighted_moments(design, weights)
        fit = lsr_fit_ar(m, n, F, lcfg) if ar else lsr_fit(m, n, F, lcfg)
    grid, y_hist, X_hist = _aligned_history(dep, xs)
    hist_weights = exp_weights([quarter_end(k) for k in grid], origin, cfg.half_life_years)
    fit = attach_latent_stats(fit, X_hist, hist_weights)
    preds = {h: lsr_predict(fit, X_hist, y_hist, h) for h in range(1, F + 1)}
    return fit, preds, df


def profile_at(
    spec: FactorSpec,
    methodology: str,
    dep: dict[int, float],
    xs: list[dict[int, float]],
    origin: date,
    cfg: BacktestConfig,
) -> ForecastProfile | None:
    """Fit one methodology on an as-of snapshot and emit its forecast profile.

    Returns None when no horizon clears the degrees-of-freedom gate.
    """
    family = methodology_family(methodology)
    F = cfg.horizons
    base_period = max(dep)
    predictions: dict[int, float] = {}
    model_df: dict[int, int] = {}
    converged: dict[int, bool] = {}
    fit_doc = None

    if family == "lsr":
        fitted = _fit_lsr_profile(dep, xs, origin, cfg, LSR_METHODOLOGIES[methodology])
        if fitted is None:
            return None
        fit, preds, df = fitted
        fit_doc = fit_to_dict(fit)
        for h in range(1, F + 1):
            predictions[h] = preds[h]
            model_df[h] = df
            converged[h] = fit.converged
    elif family == "direct":
        options = DIRECT_METHODOLOGIES[methodology]
        kind, p = options["kind"], options["p"]
        n = len(xs)
        x_now = [x.get(base_period) for x in xs]
        if any(v is None for v in x_now):
            return None
        n_coef = 1 + n + p + (1 if kind in ("MAX", "ARMAX") else 0)
        for h in range(1, F + 1):
            try:
                dd = build_direct_design(xs, dep, h, p)
            except InsufficientDataError:
                continue
            df = dd.s - n_coef
            if df < cfg.min_df:
                continue
            weights = exp_weights([quarter_end(k) for k in dd.periods], origin, cfg.half_life_years)
            fit = fit_direct(dd, weights, kind, cfg.ml_opts)
            y_hist = [dep[k] for k in sorted(dep)]
            predictions[h] = bench_predict(fit, y_hist, x_now, h)
            model_df[h] = df
            converged[h] = fit.converged
            fit_doc = bench_fit_to_dict(fit)
        if not predictions:
            return None
    else:
        options = UNIVARIATE_METHODOLOGIES[methodology]
        kind, p = options["kind"], options["p"]
        grid = sorted(dep)
        y = np.array([dep[k] for k in grid])
        n_coef = {"EWMA": 1, "AR": 1 + p, "MA1": 2, "ARMA11": 3}[kind]
        rows = len(y) - p
        df = rows - n_coef
        if df < cfg.min_df:
            return None
        weights = exp_weights([quarter_end(k) for k in grid], origin, cfg.half_life_years)
        try:
            fit = fit_univariate(y, weights, kind, order=p, ml_opts=cfg.ml_opts)
        except InsufficientDataError:
            return None
        fit_doc = bench_fit_to_dict(fit)
        for h in range(1, F + 1):
            predictions[h] = bench_predict(fit, y, None, h)
            model_df[h] = df
            converged[h] = fit.converged

    return ForecastProfile(
        spec_id=spec.spec_id,
        methodology=methodology,
        origin=origin,
        base_period=base_period,
        predictions=predictions,
        realized={},
        model_df=model_df,
        converged=converged,
        fit_doc=fit_doc,
    )


def run_backtest(
    spec: FactorSpec,
    methodology: str,
    store: dict[str, VintageSeries],
    variable_defs: dict[str, VariableDef],
    cfg: BacktestConfig,
) -> list[ForecastProfile]:
    """Walk the release clock and emit one profile per qualifying visit."""
    dep_def = variable_defs[spec.dependent]
    explan_defs = [variable_defs[name] for name in spec.variables()]
    series_ids = sorted(
        {sid for v in [dep_def, *explan_defs] for sid in v.sources}
    )
    first_release, last_release = _store_release_span(store, series_ids)
    start = cfg.start or first_release
    end = cfg.end or last_release
    profiles: list[ForecastProfile] = []
    last_count = -1
    for d in clock_dates(start, end, cfg.clock_checks_per_quarter):
        count = releases_visible(store, series_ids, d)
        if count == last_count:
            continue
        last_count = count
        try:
            dep = variable_series(store, dep_def, d)
            xs = [variable_series(store, v, d) for v in explan_defs]
        except InsufficientDataError:
            continue
        if len(dep) < 2 or any(not x for x in xs):
            continue
        dep_latest = max(dep)
        if any(max(x) < dep_latest for x in xs):
            continue
        profile = profile_at(spec, methodology, dep, xs, d, cfg)
        if profile is not None:
            profiles.append(profile)
    return profiles


def _first_vintage_value(store, dep_def, target: int, after: date) -> float | None:
    """Dependent's transformed value at the earliest vintage that contains it."""
    candidates = sorted(
        {
            r
            for sid in dep_def.sources
            for _, r, _ in store[sid].observations
            if r > after
        }
    )
    for d in candidates:
        snap = variable_series(store, dep_def, d)
        if target in snap:
            return snap[target]
    return None


def realize(
    profiles: list[ForecastProfile],
    store: dict[str, VintageSeries],
    dep_def: VariableDef,
    cfg: BacktestConfig,
) -> list[ForecastProfile]:
    """Attach realized dependent values to each profile's horizons.

    Under the default "latest" rule actuals come from the final vintage;
    under "first" each target quarter is read off the earliest vintage in
    which its transformed value exists.  Horizons beyond the available
    history stay empty.
    """
    out = []
    if cfg.realized_vintage == "latest":
        _, last_release = _store_release_span(store, dep_def.sources)
        final = variable_series(store, dep_def, last_release)
        for p in profiles:
            realized = {
                h: final[p.base_period + h]
                for h in p.predictions
                if (p.base_period + h) in final
            }
            out.append(replace_profile(p, realized))
        return out
    cache: dict[int, float | None] = {}
    for p in profiles:
        realized = {}
        for h in p.predictions:
            target = p.base_period + h
            if target not in cache:
                cache[target] = _first_vintage_value(store, dep_def, target, p.origin)
            if cache[target] is not None:
                realized[h] = cache[target]
        out.append(replace_profile(p, realized))
    return out


def replace_profile(p: ForecastProfile, realized: dict[int, float]) -> ForecastProfile:
    return ForecastProfile(
        spec_id=p.spec_id,
        methodology=p.methodology,
        origin=p.origin,
        base_period=p.base_period,
        predictions=dict(p.predictions),
        realized=realized,
        model_df=dict(p.model_df),
        converged=dict(p.converged),
        fit_doc=p.fit_doc,
    )


def write_profiles_csv(path, profiles: list[ForecastProfile]) -> None:
    """Profile export: ``origin,horizon,prediction,realized,model_df,converged``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin", "horizon", "prediction", "realized", "model_df", "converged"])
        for p in profiles:
            for h in sorted(p.predictions):
                realized = p.realized.get(h)
                writer.writerow(
                    [
                        p.origin.isoformat(),
                        h,
                        repr(p.predictions[h]),
                        "" if realized is None else repr(realized),
                        p.model_df[h],
                        "true" if p.converged[h] else "false",
                    ]
                )


def read_profiles_csv(path, spec_id: str, methodology: str) -> list[ForecastProfile]:
    """Reload profiles written by :func:`write_profiles_csv`."""
    grouped: dict[date, ForecastProfile] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            origin = date.fromisoformat(row["origin"])
            if origin not in grouped:
                grouped[origin] = ForecastProfile(
                    spec_id=spec_id,
                    methodology=methodology,
                    origin=origin,
                    base_period=0,
                    predictions={},
                    realized={},
                    model_df={},
                    converged={},
                )
            p = grouped[origin]
            h = int(row["horizon"])
            p.predictions[h] = float(row["prediction"])
            if row["realized"]:
                p.realized[h] = float(row["realized"])
            p.model_df[h] = int(row["model_df"])
            p.converged[h] = row["converged"] == "true"
    return [grouped[o] for o in sorted(grouped)]
