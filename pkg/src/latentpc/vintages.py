"""Point-in-time (vintage) time series and variable transforms.

A vintage series stores every published value of an economic indicator
together with its release date, so that the information set available on any
historical day can be reconstructed exactly.  Variables are derived from one
or two source series through a small transform language (natural log, first
difference, subtraction of a companion series, gap-filling from a companion)
plus an optional extra differencing count, mirroring the usual construction
of inflation, growth and gap measures.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, timedelta

from .periods import last_month_of_quarter, month_key, quarter_key

STEP_LOG = "natural-log"
STEP_DIFF = "first-difference"
STEP_SUBTRACT = "subtract-second-series"
STEP_FILL = "take-second-if-first-missing"
KNOWN_STEPS = (STEP_LOG, STEP_DIFF, STEP_SUBTRACT, STEP_FILL)
BINARY_STEPS = (STEP_SUBTRACT, STEP_FILL)

AGG_NONE = "none"
AGG_LAST = "last"
AGG_SUM = "sum"
KNOWN_AGGREGATIONS = (AGG_NONE, AGG_LAST, AGG_SUM)

ROLES = ("dependent", "factor", "control")


class VintageError(Exception):
    """Base class for vintage-data failures."""


class VintageParseError(VintageError):
    """A CSV row could not be parsed; message carries the line number."""


class VintageIntegrityError(VintageError):
    """Structural violation: duplicate (period, release) or non-finite value."""


class TransformDomainError(VintageError):
    """A transform step received input outside its domain (names the period)."""


class ConfigError(VintageError):
    """Inconsistent variable or transform configuration."""


@dataclass(frozen=True)
class TransformSpec:
    """Ordered calculation steps plus the extra differencing suffix count.

    ``extra_differencing`` encodes the variant suffix: 0 for the level form,
    1 for a once-differenced "(d)" variant, 2 for "(dd)", and so on.
    """

    steps: tuple[str, ...] = ()
    extra_differencing: int = 0

    def __post_init__(self) -> None:
        for s in self.steps:
            if s not in KNOWN_STEPS:
                raise ConfigError(f"unknown transform step {s!r}")
        if self.extra_differencing < 0:
            raise ConfigError("extra_differencing must be >= 0")

    @property
    def n_differences(self) -> int:
        """Total number of shortening (differencing) operations."""
        return sum(1 for s in self.steps if s == STEP_DIFF) + self.extra_differencing


@dataclass(frozen=True)
class VariableDef:
    """A model variable derived from one or two source series.

    ``aggregation`` gives the sub-quarterly-to-quarterly rule per source:
    "none" for series already on a quarterly grid, "last" to take the final
    observation of each quarter (levels), "sum" to add all within-quarter
    observations (series already stored in change form).
    """

    name: str
    sources: tuple[str, ...]
    transform: TransformSpec
    role: str
    aggregation: tuple[str, ...] = (AGG_NONE,)

    def __post_init__(self) -> None:
        if not 1 <= len(self.sources) <= 2:
            raise ConfigError(f"variable {self.name!r}: needs 1 or 2 sources")
        if self.role not in ROLES:
            raise ConfigError(f"variable {self.name!r}: unknown role {self.role!r}")
        wants_two = any(s in BINARY_STEPS for s in self.transform.steps)
        if wants_two and len(self.sources) != 2:
            raise ConfigError(f"variable {self.name!r}: two-series step needs 2 sources")
        if not wants_two and len(self.sources) == 2:
            raise ConfigError(f"variable {self.name!r}: second source unused by transform")
        if len(self.aggregation) == 1:
            object.__setattr__(self, "aggregation", self.aggregation * len(self.sources))
        if len(self.aggregation) != len(self.sources):
            raise ConfigError(f"variable {self.name!r}: aggregation/source count mismatch")
        for a in self.aggregation:
            if a not in KNOWN_AGGREGATIONS:
                raise ConfigError(f"variable {self.name!r}: unknown aggregation {a!r}")


class VintageSeries:
    """Immutable store of (period, release, value) observations for one series.

    Multiple releases per period represent revisions; retrieval as of a date
    returns, per period, the value carried by the latest release on or before
    that date.
    """

    def __init__(self, series_id: str, observations) -> None:
        seen: set[tuple[date, date]] = set()
        obs: list[tuple[date, date, float]] = []
        for period, release, value in observations:
            key = (period, release)
            if key in seen:
                raise VintageIntegrityError(
                    f"{series_id}: duplicate (period, release) = ({period}, {release})"
                )
            seen.add(key)
            v = float(value)
            if not math.isfinite(v):
                raise VintageIntegrityError(f"{series_id}: non-finite value at {period}")
            obs.append((period, release, v))
        obs.sort(key=lambda o: (o[0], o[1]))
        self.series_id = series_id
        self._obs = tuple(obs)
        self._releases_sorted = tuple(sorted(o[1] for o in obs))

    def __len__(self) -> int:
        return len(self._obs)

    @property
    def observations(self) -> tuple[tuple[date, date, float], ...]:
        return self._obs

    def as_of(self, d: date) -> dict[date, float]:
        """Snapshot of the series as known on day ``d`` (period -> value)."""
        out: dict[date, float] = {}
        best: dict[date, date] = {}
        for period, release, value in self._obs:
            if release <= d and (period not in best or release >= best[period]):
                best[period] = release
                out[period] = value
        return out

    def releases_on_or_before(self, d: date) -> int:
        """Number of individual releases published on or before ``d``."""
        lo, hi = 0, len(self._releases_sorted)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._releases_sorted[mid] <= d:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def first_release(self) -> date | None:
        return self._releases_sorted[0] if self._releases_sorted else None

    def last_release(self) -> date | None:
        return self._releases_sorted[-1] if self._releases_sorted else None

    def coverage_summary(self) -> dict:
        periods = sorted({o[0] for o in self._obs})
        revised = sum(1 for p in periods if sum(1 for o in self._obs if o[0] == p) > 1)
        return {
            "series_id": self.series_id,
            "n_observations": len(self._obs),
            "n_periods": len(periods),
            "first_period": periods[0].isoformat() if periods else None,
            "last_period": periods[-1].isoformat() if periods else None,
            "first_release": self.first_release().isoformat() if self._obs else None,
            "last_release": self.last_release().isoformat() if self._obs else None,
            "revised_periods": revised,
        }


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for vintage CSV files.

    Rows with an empty release cell are treated as version-control-free and
    get a synthetic release ``release_lag_days`` after the period end, so the
    backtest clock can treat every series uniformly.
    """

    series_id: str = "series_id"
    period: str = "period"
    release: str = "release"
    value: str = "value"
    release_lag_days: int = 1
    per_series_lag_days: dict = field(default_factory=dict)

    def lag_for(self, series_id: str) -> int:
        return int(self.per_series_lag_days.get(series_id, self.release_lag_days))


def _parse_rows(path, schema: CsvSchema):
    rows = []
    seen: set[tuple[str, date, date]] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return rows
        for col in (schema.series_id, schema.period, schema.release, schema.value):
            if col not in reader.fieldnames:
                raise VintageParseError(f"{path}: missing column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            sid = (row[schema.series_id] or "").strip()
            if not sid:
                raise VintageParseError(f"{path}:{lineno}: empty series_id")
            try:
                period = date.fromisoformat(row[schema.period].strip())
            except (ValueError, AttributeError) as exc:
                raise VintageParseError(f"{path}:{lineno}: bad period: {exc}") from exc
            release_raw = (row[schema.release] or "").strip()
            if release_raw:
                try:
                    release = date.fromisoformat(release_raw)
                except ValueError as exc:
                    raise VintageParseError(f"{path}:{lineno}: bad release: {exc}") from exc
            else:
                release = period + timedelta(days=schema.lag_for(sid))
            try:
                value = float(row[schema.value])
            except (TypeError, ValueError) as exc:
                raise VintageParseError(f"{path}:{lineno}: bad value: {exc}") from exc
            if not math.isfinite(value):
                raise VintageParseError(f"{path}:{lineno}: non-finite value")
            key = (sid, period, release)
            if key in seen:
                raise VintageIntegrityError(
                    f"{path}:{lineno}: duplicate (period, release) for {sid}"
                )
            seen.add(key)
            rows.append((sid, period, release, value))
    return rows


def load_vintage_csv(path, schema: CsvSchema | None = None) -> VintageSeries:
    """Load a single-series vintage CSV (header ``series_id,period,release,value``)."""
    schema = schema or CsvSchema()
    rows = _parse_rows(path, schema)
    ids = sorted({r[0] for r in rows})
    if len(ids) > 1:
        raise VintageParseError(f"{path}: expected one series, found {ids}")
    sid = ids[0] if ids else str(path)
    return VintageSeries(sid, [(p, r, v) for _, p, r, v in rows])


def load_vintage_store(paths, schema: CsvSchema | None = None) -> dict[str, VintageSeries]:
    """Load one or more vintage CSVs into a store keyed by series_id.

    Files may hold several series; a series may not be split across files.
    """
    schema = schema or CsvSchema()
    grouped: dict[str, list] = {}
    for path in paths:
        for sid, period, release, value in _parse_rows(path, schema):
            grouped.setdefault(sid, []).append((period, release, value))
    return {sid: VintageSeries(sid, rows) for sid, rows in sorted(grouped.items())}


def aggregate_quarterly(snapshot: dict[date, float], rule: str) -> dict[int, float]:
    """Collapse a dated snapshot onto the quarterly grid (quarter key -> value).

    "none" expects at most one observation per quarter; "last" keeps the
    latest observation of each quarter provided it falls in the quarter's
    final month; "sum" adds all observations of a quarter provided every
    month of the quarter is covered.
    """
    if rule == AGG_NONE:
        out: dict[int, float] = {}
        for d in sorted(snapshot):
            k = quarter_key(d)
            if k in out:
                raise VintageIntegrityError(
                    f"multiple observations in quarter {k} but aggregation is 'none'"
                )
            out[k] = snapshot[d]
        return out
    by_quarter: dict[int, list[date]] = {}
    for d in snapshot:
        by_quarter.setdefault(quarter_key(d), []).append(d)
    out = {}
    for k, dates in by_quarter.items():
        dates.sort()
        months = {month_key(d) for d in dates}
        if rule == AGG_LAST:
            if last_month_of_quarter(k) in months:
                out[k] = snapshot[dates[-1]]
        elif rule == AGG_SUM:
            year, q = divmod(k, 4)
            wanted = {year * 12 + 3 * q + j for j in range(3)}
            if wanted <= months:
                out[k] = sum(snapshot[d] for d in dates)
        else:
            raise ConfigError(f"unknown aggregation rule {rule!r}")
    return out


def _log_series(series: dict[int, float], name: str) -> dict[int, float]:
    out = {}
    for k, v in series.items():
        if v <= 0.0:
            raise TransformDomainError(
                f"{name}: natural-log of non-positive value in quarter {k}"
            )
        out[k] = math.log(v)
    return out


def _diff_series(series: dict[int, float]) -> dict[int, float]:
    return {k: v - series[k - 1] for k, v in series.items() if k - 1 in series}


def apply_transform(
    primary: dict[int, float],
    vdef: VariableDef,
    companion: dict[int, float] | None = None,
) -> dict[int, float]:
    """Apply a variable's calculation steps to quarterly source series.

    Unary steps act on both operands until a two-series step merges them.
    Differencing (including the extra differencing count) drops the first
    available period per pass, which keeps the transform length law exact on
    contiguous input.
    """
    wants_two = any(s in BINARY_STEPS for s in vdef.transform.steps)
    if wants_two and companion is None:
        raise ConfigError(f"variable {vdef.name!r}: companion series required")
    if not wants_two and companion is not None:
        raise ConfigError(f"variable {vdef.name!r}: unexpected companion series")
    cur = dict(primary)
    other = dict(companion) if companion is not None else None
    for step in vdef.transform.steps:
        if step == STEP_LOG:
            cur = _log_series(cur, vdef.name)
            if other is not None:
                other = _log_series(other, vdef.name)
        elif step == STEP_DIFF:
            cur = _diff_series(cur)
            if other is not None:
                other = _diff_series(other)
        elif step == STEP_SUBTRACT:
            cur = {k: cur[k] - other[k] for k in cur if k in other}
            other = None
        elif step == STEP_FILL:
            merged = dict(other)
            merged.update(cur)
            cur = merged
            other = None
    for _ in range(vdef.transform.extra_differencing):
        cur = _diff_series(cur)
    return cur


def contiguous_tail(series: dict[int, float]) -> dict[int, float]:
    """Truncate to the run of consecutive quarters ending at the latest one.

    Gaps inside a series are never interpolated; everything at or before the
    most recent gap is unusable history.
    """
    if not series:
        return {}
    k = max(series)
    start = k
    while start - 1 in series:
        start -= 1
    return {q: series[q] for q in range(start, k + 1)}


def variable_series(
    store: dict[str, VintageSeries], vdef: VariableDef, as_of_date: date
) -> dict[int, float]:
    """Full pipeline: snapshot, quarterly aggregation, transform, gap truncation."""
    snaps = []
    for sid, rule in zip(vdef.sources, vdef.aggregation):
        if sid not in store:
            raise ConfigError(f"variable {vdef.name!r}: series {sid!r} not in store")
        snaps.append(aggregate_quarterly(store[sid].as_of(as_of_date), rule))
    companion = snaps[1] if len(snaps) == 2 else None
    return contiguous_tail(apply_transform(snaps[0], vdef, companion))
