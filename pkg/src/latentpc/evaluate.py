"""Forecast-accuracy metrics: MSPE, rank tables, F-tests, predictor effects.

Methodology comparisons are like-for-like: before any MSPE is computed for a
(specification, horizon) cell, every methodology is truncated to the common
set of forecast origins with realized outcomes, so all compared errors cover
the same history.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from scipy import stats

from .backtest import ForecastProfile, UNIVARIATE_METHODOLOGIES


class AlignmentError(Exception):
    """Methodologies being compared do not share forecast coverage."""


@dataclass
class EvalRecord:
    """One evaluated (specification, methodology, horizon) cell."""

    spec_id: str
    methodology: str
    horizon: int
    n_obs: int
    mspe: float | None
    rank: int | None = None
    tie: bool = False
    f_stat: float | None = None
    p_value: float | None = None
    improvement: float | None = None
    degenerate: bool = False


def mspe(profiles: Sequence[ForecastProfile], horizon: int) -> tuple[float | None, int]:
    """Unweighted mean squared error over realized pairs at one horizon.

    Returns (None, 0) when no realized pair exists; such cells are excluded
    from rank tables.
    """
    errors = [
        p.predictions[horizon] - p.realized[horizon]
        for p in profiles
        if horizon in p.predictions and horizon in p.realized
    ]
    if not errors:
        return None, 0
    return sum(e * e for e in errors) / len(errors), len(errors)


def rank_group(mspe_by_methodology: Mapping[str, float]) -> dict[str, tuple[int, bool]]:
    """Ranks 1..k by ascending MSPE; exact ties broken lexicographically and flagged."""
    items = sorted(mspe_by_methodology.items(), key=lambda kv: (kv[1], kv[0]))
    values = [v for _, v in items]
    out = {}
    for i, (name, v) in enumerate(items):
        tied = (i > 0 and values[i - 1] == v) or (i + 1 < len(values) and values[i + 1] == v)
        out[name] = (i + 1, tied)
    return out


def rank_table(
    mspe_by_cell: Mapping[tuple[str, int], Mapping[str, float]],
    n_obs_by_cell: Mapping[tuple[str, int], Mapping[str, int]] | None = None,
) -> dict[tuple[str, int], dict[str, tuple[int, bool]]]:
    """Per (spec, horizon) rank assignment across methodologies.

    When observation counts are supplied they must agree within each cell;
    unequal coverage raises :class:`AlignmentError`.
    """
    out = {}
    for cell, group in mspe_by_cell.items():
        if n_obs_by_cell is not None:
            counts = set(n_obs_by_cell[cell].values())
            if len(counts) > 1:
                raise AlignmentError(
                    f"coverage mismatch in spec {cell[0]} horizon {cell[1]}: {sorted(counts)}"
                )
        out[cell] = rank_group(group)
    return out


def f_test_mspe(mspe_model: float, mspe_bench: float, n_obs: int) -> tuple[float, float]:
    """One-sided F-test of the model improving on the benchmark.

    The statistic is benchmark MSPE over model MSPE with (n_obs, n_obs)
    degrees of freedom, so values above 1 favour the model; the p-value is
    the upper tail.  A zero model MSPE yields p = 0 (degenerate).
    """
    if n_obs < 2:
        raise ValueError("need at least 2 realized pairs for the F-test")
    if mspe_model == 0.0:
        return math.inf, 0.0
    f_stat = mspe_bench / mspe_model
    p_value = float(stats.f.sf(f_stat, n_obs, n_obs))
    return float(f_stat), p_value


def predictor_effect(
    records: Sequence[EvalRecord],
    spec_variables: Mapping[str, Sequence[str]],
    variable: str,
    horizon: int,
    benchmark_mspe: float,
) -> float | None:
    """Median-MSPE shift from including one variable, relative to the benchmark.

    Computes (median over specs containing the variable minus the global
    median) divided by the benchmark MSPE; negative values indicate an
    accuracy improvement.  Returns None when no spec contains the variable.
    """
    at_h = [r for r in records if r.horizon == horizon and r.mspe is not None]
    if not at_h:
        return None
    all_vals = sorted(r.mspe for r in at_h)
    var_vals = sorted(
        r.mspe for r in at_h if variable in spec_variables.get(r.spec_id, ())
    )
    if not var_vals:
        return None
    return (_median(var_vals) - _median(all_vals)) / benchmark_mspe


def _median(sorted_vals: Sequence[float]) -> float:
    k = len(sorted_vals)
    mid = k // 2
    if k % 2:
        return sorted_vals[mid]
    return 0.5 * (sorted_vals[mid - 1] + sorted_vals[mid])


def outperform_share(
    records: Sequence[EvalRecord],
    methodology: str,
    horizon: int,
    threshold: float | None = None,
    benchmark: str = "MA1",
    univariate: Sequence[str] = tuple(UNIVARIATE_METHODOLOGIES),
) -> float:
    """Share of specs where the methodology wins.

    Without a threshold: the fraction of specs whose MSPE beats every
    univariate benchmark present.  With a threshold: the fraction whose
    improvement over the benchmark methodology is at least the threshold
    (boundary counted).
    """
    by_spec: dict[str, dict[str, EvalRecord]] = {}
    for r in records:
        if r.horizon == horizon and r.mspe is not None:
            by_spec.setdefault(r.spec_id, {})[r.methodology] = r
    total = 0
    hits = 0
    for cell in by_spec.values():
        if methodology not in cell:
            continue
        own = cell[methodology].mspe
        if threshold is None:
            rivals = [cell[u].mspe for u in univariate if u in cell]
            if not rivals:
                continue
            total += 1
            if own < min(rivals):
                hits += 1
        else:
            if benchmark not in cell or cell[benchmark].mspe == 0.0:
                continue
            total += 1
            # >= at the boundary, with an epsilon so exact fixtures count.
            if 1.0 - own / cell[benchmark].mspe >= threshold - 1e-12:
                hits += 1
    return hits / total if total else 0.0


def evaluate_profiles(
    profiles_by_pair: Mapping[tuple[str, str], Sequence[ForecastProfile]],
    horizons: Sequence[int],
    benchmark: str = "MA1",
) -> list[EvalRecord]:
    """Build the full evaluation table with coverage-aligned MSPEs and ranks.

    For each (spec, horizon) cell, forecast origins are intersected across
    all methodologies carrying that horizon, MSPEs are computed on the common
    set, ranks assigned, and F-test/improvement columns filled against the
    benchmark methodology when it is present.
    """
    by_spec: dict[str, dict[str, Sequence[ForecastProfile]]] = {}
    for (spec_id, methodology), profiles in profiles_by_pair.items():
        by_spec.setdefault(spec_id, {})[methodology] = profiles
    records: list[EvalRecord] = []
    for spec_id in sorted(by_spec):
        methods = by_spec[spec_id]
        for h in horizons:
            pairs: dict[str, dict] = {}
            for methodology, profiles in methods.items():
                got = {
                    p.origin: (p.predictions[h], p.realized[h])
                    for p in profiles
                    if h in p.predictions and h in p.realized
                }
                if got:
                    pairs[methodology] = got
            if not pairs:
                for methodology in methods:
                    records.append(EvalRecord(spec_id, methodology, h, 0, None))
                continue
            common = set.intersection(*(set(g) for g in pairs.values()))
            cell: dict[str, EvalRecord] = {}
            for methodology in sorted(methods):
                got = pairs.get(methodology)
                if got is None or not common:
                    cell[methodology] = EvalRecord(spec_id, methodology, h, 0, None)
                    continue
                errors = [got[o][0] - got[o][1] for o in common]
                value = sum(e * e for e in errors) / len(errors)
                cell[methodology] = EvalRecord(
                    spec_id, methodology, h, len(errors), value
                )
            defined = {m: r.mspe for m, r in cell.items() if r.mspe is not None}
            ranks = rank_group(defined)
            bench = cell.get(benchmark)
            for methodology, record in cell.items():
                if record.mspe is not None:
                    record.rank, record.tie = ranks[methodology]
                    if (
                        bench is not None
                        and bench.mspe is not None
                        and record.n_obs >= 2
                    ):
                        if record.mspe == 0.0:
                            record.degenerate = True
                        record.f_stat, record.p_value = f_test_mspe(
                            record.mspe, bench.mspe, record.n_obs
                        )
                        if bench.mspe > 0.0:
                            record.improvement = 1.0 - record.mspe / bench.mspe
                records.append(record)
    return records


def summarize(
    records: Sequence[EvalRecord],
    spec_variables: Mapping[str, Sequence[str]],
    horizons: Sequence[int],
    benchmark: str = "MA1",
    effects_methodology: str | None = None,
    significance_level: float = 0.25,
    improvement_threshold: float = 0.10,
) -> dict:
    """Figure-ready aggregates: median ranks, win shares, predictor effects."""
    methodologies = sorted({r.methodology for r in records})
    ranked = [r for r in records if r.rank is not None]

    def cells(methodology, horizon):
        return [r for r in ranked if r.methodology == methodology and r.horizon == horizon]

    median_rank = {}
    rank1_share = {}
    beats_univariate = {}
    significant_share = {}
    improve_share = {}
    for m in methodologies:
        median_rank[m] = {}
        rank1_share[m] = {}
        beats_univariate[m] = {}
        significant_share[m] = {}
        improve_share[m] = {}
        for h in horizons:
            rs = cells(m, h)
            key = str(h)
            if rs:
                median_rank[m][key] = _median(sorted(r.rank for r in rs))
                rank1_share[m][key] = sum(1 for r in rs if r.rank == 1) / len(rs)
                with_p = [r for r in rs if r.p_value is not None]
                if with_p:
                    significant_share[m][key] = sum(
                        1
                        for r in with_p
                        if r.p_value < significance_level and r.f_stat > 1.0
                    ) / len(with_p)
            beats_univariate[m][key] = outperform_share(records, m, h)
            improve_share[m][key] = outperform_share(
                records, m, h, threshold=improvement_threshold, benchmark=benchmark
            )

    if effects_methodology is None:
        for candidate in ("LSR-ARMA11", "LSR", "LSR-AR0", "LSR-MA1"):
            if candidate in methodologies:
                effects_methodology = candidate
                break
        else:
            effects_methodology = methodologies[0] if methodologies else None

    predictor_effects: dict[str, dict[str, float]] = {}
    if effects_methodology is not None:
        chosen = [r for r in records if r.methodology == effects_methodology]
        variables = sorted({v for vs in spec_variables.values() for v in vs})
        bench_records = [r for r in records if r.methodology == benchmark]
        for v in variables:
            per_h = {}
            for h in horizons:
                bench_at_h = sorted(
                    r.mspe for r in bench_records if r.horizon == h and r.mspe is not None
                )
                if not bench_at_h:
                    continue
                effect = predictor_effect(
                    chosen, spec_variables, v, h, _median(bench_at_h)
                )
                if effect is not None:
                    per_h[str(h)] = effect
            if per_h:
                predictor_effects[v] = per_h

    return {
        "horizons": list(horizons),
        "methodologies": methodologies,
        "benchmark": benchmark,
        "effects_methodology": effects_methodology,
        "significance_level": significance_level,
        "improvement_threshold": improvement_threshold,
        "median_rank": median_rank,
        "rank1_share": rank1_share,
        "beats_univariate_share": beats_univariate,
        "significant_share": significant_share,
        "improvement_share": improve_share,
        "predictor_effects": predictor_effects,
    }


def write_report_csv(path, records: Sequence[EvalRecord]) -> None:
    """Report export: one row per (spec, methodology, horizon)."""

    def fmt(v):
        return "" if v is None else repr(v)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "spec_id",
                "methodology",
                "horizon",
                "n_obs",
                "mspe",
                "rank",
                "f_stat",
                "p_value",
                "improvement",
            ]
        )
        for r in records:
            writer.writerow(
                [
                    r.spec_id,
                    r.methodology,
                    r.horizon,
                    r.n_obs,
                    fmt(r.mspe),
                    "" if r.rank is None else r.rank,
                    fmt(r.f_stat),
                    fmt(r.p_value),
                    fmt(r.improvement),
                ]
            )


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
