"""Rolling out-of-sample engine: clock, gates, realization, no-lookahead."""

from datetime import date, timedelta

import numpy as np
import pytest

from latentpc.backtest import (
    BacktestConfig,
    clock_dates,
    poison_after,
    profile_at,
    realize,
    run_backtest,
)
from latentpc.periods import quarter_end
from latentpc.specgen import FactorSpec, spec_id_of
from latentpc.vintages import TransformSpec, VariableDef, VintageSeries, variable_series


def quarterly_store(series_values, release_lag=30, revision_lag=None, revision_shift=0.0):
    """Build a store of quarterly series; optional uniform later revision."""
    store = {}
    for sid, (start_key, values) in series_values.items():
        rows = []
        for i, v in enumerate(values):
            period = quarter_end(start_key + i)
            rows.append((period, period + timedelta(days=release_lag), float(v)))
            if revision_lag is not None:
                rows.append(
                    (
                        period,
                        period + timedelta(days=revision_lag),
                        float(v) + revision_shift,
                    )
                )
        store[sid] = VintageSeries(sid, rows)
    return store


def plain_var(name, sid, role):
    return VariableDef(
        name=name, sources=(sid,), transform=TransformSpec(), role=role
    )


def toy_universe(s=120, seed=0, n_x=2, release_lag_y=40, release_lag_x=30):
    """Dependent driven by lagged x's; everything released with a lag."""
    rng = np.random.default_rng(seed)
    start = 1980 * 4
    x = rng.normal(size=(s, n_x))
    y = np.zeros(s)
    for t in range(2, s):
        y[t] = 0.4 * x[t - 1].sum() + 0.2 * x[t - 2].sum() + rng.normal(0, 0.3)
    store = {}
    rows = [
        (quarter_end(start + t), quarter_end(start + t) + timedelta(days=release_lag_y), float(y[t]))
        for t in range(s)
    ]
    store["dep"] = VintageSeries("dep", rows)
    for i in range(n_x):
        rows = [
            (
                quarter_end(start + t),
                quarter_end(start + t) + timedelta(days=release_lag_x),
                float(x[t, i]),
            )
            for t in range(s)
        ]
        store[f"x{i}"] = VintageSeries(f"x{i}", rows)
    defs = {"Dep": plain_var("Dep", "dep", "dependent")}
    for i in range(n_x):
        defs[f"X{i}"] = plain_var(f"X{i}", f"x{i}", "factor" if i == 0 else "control")
    spec = FactorSpec(
        spec_id=spec_id_of("Dep", "X0", [f"X{i}" for i in range(1, n_x)]),
        family="standard",
        dependent="Dep",
        activity="X0",
        controls=tuple(f"X{i}" for i in range(1, n_x)),
    )
    return store, defs, spec


def small_cfg(**kw):
    defaults = dict(min_df=20, horizons=4, half_life_years=10.0)
    defaults.update(kw)
    return BacktestConfig(**defaults)


class TestClock:
    def test_two_checks_per_quarter(self):
        dates = clock_dates(date(2000, 1, 1), date(2000, 12, 31), 2)
        assert dates == [
            date(2000, 2, 1),
            date(2000, 2, 15),
            date(2000, 5, 1),
            date(2000, 5, 15),
            date(2000, 8, 1),
            date(2000, 8, 15),
            date(2000, 11, 1),
            date(2000, 11, 15),
        ]

    def test_custom_check_count(self):
        dates = clock_dates(date(2000, 1, 1), date(2000, 3, 31), 4)
        assert len(dates) == 4
        assert all(d.month == 2 for d in dates)


class TestGates:
    def test_recency_gate_blocks_stale_regressor(self):
        # The dependent is fresher than x1: no profile on those dates.
        store, defs, spec = toy_universe(s=100, release_lag_y=10, release_lag_x=80)
        cfg = small_cfg()
        profiles = run_backtest(spec, "ARX1", store, defs, cfg)
        for p in profiles:
            dep = variable_series(store, defs["Dep"], p.origin)
            for name in spec.variables():
                xv = variable_series(store, defs[name], p.origin)
                assert max(xv) >= max(dep)

    def test_df_gate_boundary(self):
        # First profile appears exactly when usable rows - coefs >= min_df.
        store, defs, spec = toy_universe(s=90)
        cfg = small_cfg(min_df=30, horizons=4)
        profiles = run_backtest(spec, "ARX1", store, defs, cfg)
        assert profiles
        first = profiles[0]
        # Horizon 1 rows at the first origin: recompute and check the bound.
        dep = variable_series(store, defs["Dep"], first.origin)
        n_rows = len(dep) - 1  # one lead lost at horizon 1
        n_coef = 1 + len(spec.variables()) + 1
        assert n_rows - n_coef >= 30
        # One clock check earlier the gate must fail for some horizon...
        assert 1 in first.model_df

    def test_release_gate_no_duplicate_profiles(self):
        store, defs, spec = toy_universe(s=80)
        # Pin the clock window so the truncated store ticks the same dates.
        cfg = small_cfg(start=date(1980, 1, 1), end=date(2005, 1, 1))
        profiles = run_backtest(spec, "ARX1", store, defs, cfg)
        origins = [p.origin for p in profiles]
        assert len(origins) == len(set(origins))
        # Remove all releases after a cutoff: the clock keeps ticking but no
        # new profiles appear after the last release.
        cutoff = origins[len(origins) // 2]
        frozen = poison_after(store, cutoff)
        for sid, series in frozen.items():
            frozen[sid] = VintageSeries(
                sid, [o for o in series.observations if o[1] <= cutoff]
            )
        late = run_backtest(spec, "ARX1", frozen, defs, cfg)
        assert all(p.origin <= cutoff for p in late)
        # With the same data through the cutoff, matching origins agree.
        early = [p for p in profiles if p.origin <= cutoff]
        assert len(late) == len(early)
        for a, b in zip(early, late):
            assert a.origin == b.origin
            assert a.predictions == b.predictions


class TestProfiles:
    def test_lsr_profile_all_horizons(self):
        store, defs, spec = toy_universe(s=120)
        cfg = small_cfg(min_df=20, horizons=4)
        profiles = run_backtest(spec, "LSR", store, defs, cfg)
        assert profiles
        p = profiles[-1]
        assert sorted(p.predictions) == [1, 2, 3, 4]
        # One joint fit: same df at every horizon, rows = |dep| - F on this
        # fully aligned fixture, coefficients = 2 + n + F + 1 (AR term).
        n = len(spec.variables())
        dep = variable_series(store, defs["Dep"], p.origin)
        expected_df = (len(dep) - 4) - (2 + n + 4 + 1)
        assert all(p.model_df[h] == expected_df for h in p.model_df)

    def test_direct_df_varies_by_horizon(self):
        store, defs, spec = toy_universe(s=120)
        cfg = small_cfg(min_df=20, horizons=4)
        profiles = run_backtest(spec, "ARX1", store, defs, cfg)
        p = profiles[-1]
        # Longer horizons lose leads, so df decreases with the horizon.
        dfs = [p.model_df[h] for h in sorted(p.model_df)]
        assert all(a >= b for a, b in zip(dfs, dfs[1:]))

    def test_coverage_onset_monotone_in_parameters(self):
        store, defs, spec = toy_universe(s=140)
        cfg = small_cfg(min_df=25, horizons=4)
        first_origin = {}
        for meth in ("ARX1", "ARX4", "LSR", "LSR-ARMA11"):
            profiles = run_backtest(spec, meth, store, defs, cfg)
            assert profiles, meth
            first_origin[meth] = profiles[0].origin
        assert first_origin["ARX1"] <= first_origin["ARX4"]
        assert first_origin["LSR"] <= first_origin["LSR-ARMA11"]

    def test_determinism(self):
        store, defs, spec = toy_universe(s=100)
        cfg = small_cfg()
        a = run_backtest(spec, "LSR", store, defs, cfg)
        b = run_backtest(spec, "LSR", store, defs, cfg)
        assert len(a) == len(b)
        for pa, pb in zip(a, b):
            assert pa.origin == pb.origin
            assert pa.predictions == pb.predictions


class TestRealize:
    def test_latest_vintage_values(self):
        store, defs, spec = toy_universe(s=100)
        cfg = small_cfg()
        profiles = run_backtest(spec, "ARX1", store, defs, cfg)
        realized = realize(profiles, store, defs["Dep"], cfg)
        final = variable_series(store, defs["Dep"], date(2200, 1, 1))
        for p in realized:
            for h, v in p.realized.items():
                assert v == final[p.base_period + h]

    def test_end_of_sample_profiles_unrealized(self):
        store, defs, spec = toy_universe(s=100)
        cfg = small_cfg(horizons=4)
        profiles = realize(
            run_backtest(spec, "ARX1", store, defs, cfg), store, defs["Dep"], cfg
        )
        last = profiles[-1]
        # The final origin's top horizons extend beyond available history.
        assert len(last.realized) < len(last.predictions)
        assert 4 not in last.realized

    def test_first_release_vintage(self):
        # With an upward revision, first-release actuals differ from latest.
        start = 1990 * 4
        values = [1.0, 1.2, 0.8, 1.1, 0.9, 1.3, 1.0, 0.7, 1.2, 1.0, 0.8, 1.1,
                  0.9, 1.0, 1.1, 0.8]
        store = quarterly_store(
            {"dep": (start, values), "x": (start, list(np.sin(np.arange(16))))},
            release_lag=10,
            revision_lag=200,
            revision_shift=0.5,
        )
        defs = {
            "Dep": plain_var("Dep", "dep", "dependent"),
            "X": plain_var("X", "x", "factor"),
        }
        spec = FactorSpec(spec_id_of("Dep", "X", []), "standard", "Dep", "X", ())
        cfg = BacktestConfig(min_df=3, horizons=2, realized_vintage="first")
        profiles = run_backtest(spec, "EWMA", store, defs, cfg)
        assert profiles
        realized_first = realize(profiles, store, defs["Dep"], cfg)
        cfg_latest = BacktestConfig(min_df=3, horizons=2, realized_vintage="latest")
        realized_latest = realize(profiles, store, defs["Dep"], cfg_latest)
        pf = next(p for p in realized_first if p.realized)
        pl = next(p for p in realized_latest if p.origin == pf.origin)
        h = min(pf.realized)
        assert pf.realized[h] == pytest.approx(pl.realized[h] - 0.5)


class TestNoLookahead:
    @pytest.mark.parametrize("methodology", ["ARX1", "LSR", "EWMA", "MA1"])
    def test_poisoned_future_releases_change_nothing(self, methodology):
        store, defs, spec = toy_universe(s=90, seed=3)
        cfg = small_cfg(min_df=15, horizons=3)
        profiles = run_backtest(spec, methodology, store, defs, cfg)
        assert profiles
        for p in profiles[:: max(1, len(profiles) // 5)]:
            poisoned = poison_after(store, p.origin, sentinel=1e9)
            dep = variable_series(poisoned, defs["Dep"], p.origin)
            xs = [variable_series(poisoned, defs[v], p.origin) for v in spec.variables()]
            again = profile_at(spec, methodology, dep, xs, p.origin, cfg)
            assert again is not None
            assert again.predictions == p.predictions
