"""Bundled synthetic economy for end-to-end runs and fixtures.

A latent first-order autoregressive price-pressure process drives four noisy
observable indicators; the dependent is a price index whose log-difference
(sequential inflation) is integrated with MA(1) innovations plus the lagged
latent effect.  Observables arrive with a publication lag and one later
revision, so the vintage machinery is exercised end to end.

Run ``python -m latentpc.synthetic --out DIR --seed N`` to materialize the
economy as vintage CSVs plus a ready-to-run YAML config.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path

import numpy as np

from .periods import quarter_end
from .vintages import VintageSeries

DEFAULT_BETA = (0.10, 0.20, 0.30, 0.36, 0.38, 0.34, 0.26, 0.16)


@dataclass(frozen=True)
class EconomyParams:
    n_observables: int = 4
    start_year: int = 1974
    end_year: int = 2024
    latent_rho: float = 0.85
    latent_sd: float = 0.30
    beta: tuple[float, ...] = DEFAULT_BETA
    ma_theta: float = 0.40
    noise_sd: float = 0.0011
    obs_noise_sd: float = 0.55
    obs_revision_sd: float = 0.12
    infl_scale: float = 0.0025
    dep_release_days: int = 28
    dep_revision_days: int = 85
    obs_release_days: int = 35
    obs_revision_days: int = 95
    obs_revision_value_sd: float = 0.08


def make_economy(seed: int, params: EconomyParams | None = None) -> dict[str, VintageSeries]:
    """Deterministic vintage store of one synthetic economy."""
    p = params or EconomyParams()
    rng = np.random.default_rng(seed)
    F = len(p.beta)
    q0 = p.start_year * 4
    q1 = p.end_year * 4 + 3
    quarters = list(range(q0, q1 + 1))
    burn = F + 8
    total = len(quarters) + burn

    latent = np.zeros(total)
    innov = rng.normal(0.0, p.latent_sd, total)
    stationary_sd = p.latent_sd / math.sqrt(1.0 - p.latent_rho**2)
    latent[0] = rng.normal(0.0, stationary_sd)
    for t in range(1, total):
        latent[t] = p.latent_rho * latent[t - 1] + innov[t]

    u = rng.normal(0.0, p.noise_sd, total)
    d = np.zeros(total)
    for t in range(F, total):
        signal = sum(p.beta[tau - 1] * latent[t - tau] for tau in range(1, F + 1))
        d[t] = p.infl_scale * signal + u[t] + p.ma_theta * u[t - 1]
    pi = 0.005 + np.cumsum(d)
    log_index = np.cumsum(pi)
    index = 50.0 * np.exp(log_index - log_index[0])

    loadings = rng.uniform(0.7, 1.3, p.n_observables)
    obs = np.empty((total, p.n_observables))
    for i in range(p.n_observables):
        obs[:, i] = loadings[i] * latent + rng.normal(0.0, p.obs_noise_sd, total)
    first_release_noise = rng.normal(
        0.0, p.obs_revision_value_sd, (total, p.n_observables)
    )

    store: dict[str, VintageSeries] = {}
    rows = []
    for j, k in enumerate(quarters):
        t = burn + j
        period = quarter_end(k)
        rows.append(
            (period, period + timedelta(days=p.dep_release_days), float(index[t]))
        )
    store["price_index"] = VintageSeries("price_index", rows)

    names = [f"indicator_{chr(ord('a') + i)}" for i in range(p.n_observables)]
    for i, name in enumerate(names):
        rows = []
        for j, k in enumerate(quarters):
            t = burn + j
            period = quarter_end(k)
            final = float(obs[t, i])
            first = final + float(first_release_noise[t, i])
            rows.append((period, period + timedelta(days=p.obs_release_days), first))
            rows.append((period, period + timedelta(days=p.obs_revision_days), final))
        store[name] = VintageSeries(name, rows)
    return store


def economy_variable_records(params: EconomyParams | None = None) -> list[dict]:
    """Pool records for the synthetic economy (2 factors, 2 controls)."""
    p = params or EconomyParams()
    names = [f"indicator_{chr(ord('a') + i)}" for i in range(p.n_observables)]
    records = [
        {
            "name": "Synthetic sequential inflation",
            "sources": ["price_index"],
            "steps": ["natural-log", "first-difference"],
            "variants": [1],
            "role": "dependent",
            "aggregation": "none",
        }
    ]
    for i, sid in enumerate(names):
        records.append(
            {
                "name": f"Indicator {chr(ord('A') + i)}",
                "sources": [sid],
                "steps": [],
                "variants": [0],
                "role": "factor" if i < 2 else "control",
                "aggregation": "none",
            }
        )
    return records


DEFAULT_METHODOLOGIES = ("LSR", "ARX1", "ARX2", "ARX3", "ARX4", "MA1", "EWMA")


def write_economy(
    outdir,
    seed: int,
    params: EconomyParams | None = None,
    methodologies=DEFAULT_METHODOLOGIES,
) -> Path:
    """Write the economy's vintage CSVs and a run config; returns the config path."""
    import yaml

    p = params or EconomyParams()
    outdir = Path(outdir)
    datadir = outdir / "data"
    datadir.mkdir(parents=True, exist_ok=True)
    store = make_economy(seed, p)
    for sid, series in store.items():
        with open(datadir / f"{sid}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["series_id", "period", "release", "value"])
            for period, release, value in series.observations:
                writer.writerow([sid, period.isoformat(), release.isoformat(), repr(value)])
    doc = {
        "data": {"vintage_csvs": ["data/*.csv"]},
        "variables": economy_variable_records(p),
        "families": [{"name": "standard", "exclude_controls": []}],
        "backtest": {
            "min_df": 40,
            "half_life_years": 10.0,
            "horizons": 8,
            "clock_checks_per_quarter": 2,
            "start": f"{p.start_year + 16}-01-01",
        },
        "methodologies": list(methodologies),
        "output_dir": "out",
        "parallel": 1,
    }
    config_path = outdir / "run.yaml"
    with open(config_path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
    return config_path


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="write a synthetic vintage economy")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)
    path = write_economy(args.out, args.seed)
    print(f"wrote synthetic economy with seed {args.seed}; config at {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
