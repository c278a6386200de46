"""Run configuration: YAML schema, variable-pool expansion, reference universe.

A run config document has the following top-level keys (see the shipped
``configs/reference_universe.yaml`` for a complete variable pool):

    data:
      vintage_csvs: [path or glob, ...]
      release_lag_days: 1                  # synthetic lag for empty releases
      per_series_lag_days: {series_id: n}  # optional overrides
    variables:                             # one record per pool variable
      - name: str
        sources: [series_id, ...]          # 1 or 2 entries
        steps: [natural-log, ...]          # ordered transform steps
        variants: [0, 1]                   # extra differencing counts
        role: dependent | factor | control
        aggregation: none | last | sum     # scalar or one per source
    families:
      - name: str
        exclude_controls: [base variable name, ...]
    backtest:
      min_df: 40
      half_life_years: 10.0
      horizons: 8
      clock_checks_per_quarter: 2
      start: 1990-01-01                    # optional ISO dates
      end: 2025-03-31
      realized_vintage: latest             # or first
      nelder_mead_max_iters: 10000
    methodologies: [LSR, ARX1, ...]
    output_dir: out/
    parallel: 1

Variable variants expand into standalone pool entries whose names carry the
differencing suffix: 0 keeps the bare name, 1 appends " (d)", 2 " (dd)".
"""

from __future__ import annotations

import glob
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path

import yaml

from .backtest import ALL_METHODOLOGIES, BacktestConfig
from .optim import SimplexOptions
from .specgen import FamilyRule, variant_name
from .vintages import ConfigError, CsvSchema, TransformSpec, VariableDef


@dataclass
class RunConfig:
    vintage_csvs: tuple[str, ...]
    schema: CsvSchema
    pool: tuple[VariableDef, ...]
    families: tuple[FamilyRule, ...]
    backtest: BacktestConfig
    methodologies: tuple[str, ...]
    output_dir: Path
    parallel: int = 1
    config_path: Path | None = None

    def variable_defs(self) -> dict[str, VariableDef]:
        return {v.name: v for v in self.pool}

    def resolve_csv_paths(self) -> list[Path]:
        base = self.config_path.parent if self.config_path else Path(".")
        out = []
        for pattern in self.vintage_csvs:
            p = Path(pattern)
            if not p.is_absolute():
                p = base / pattern
            matches = sorted(glob.glob(str(p)))
            if matches:
                out.extend(Path(m) for m in matches)
            else:
                out.append(p)
        return out


def expand_variables(records) -> list[VariableDef]:
    """Expand pool records with ``variants`` into per-variant variable defs."""
    pool: list[VariableDef] = []
    seen: set[str] = set()
    for rec in records:
        name = rec["name"]
        sources = tuple(rec["sources"])
        steps = tuple(rec.get("steps", ()) or ())
        role = rec["role"]
        agg = rec.get("aggregation", "none")
        aggregation = (agg,) if isinstance(agg, str) else tuple(agg)
        variants = rec.get("variants", [0])
        for k in variants:
            vname = variant_name(name, int(k))
            if vname in seen:
                raise ConfigError(f"duplicate variable name {vname!r}")
            seen.add(vname)
            pool.append(
                VariableDef(
                    name=vname,
                    sources=sources,
                    transform=TransformSpec(steps=steps, extra_differencing=int(k)),
                    role=role,
                    aggregation=aggregation,
                )
            )
    return pool


def _parse_date(v) -> date | None:
    if v is None:
        return None
    if isinstance(v, date):
        return v
    return date.fromisoformat(str(v))


def load_run_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    data = doc.get("data", {})
    schema = CsvSchema(
        release_lag_days=int(data.get("release_lag_days", 1)),
        per_series_lag_days=dict(data.get("per_series_lag_days", {})),
    )
    pool = expand_variables(doc.get("variables", []))
    if not pool:
        raise ConfigError("config declares no variables")
    families = tuple(
        FamilyRule(
            name=f["name"],
            exclude_controls=tuple(f.get("exclude_controls", ()) or ()),
        )
        for f in doc.get("families", [{"name": "standard"}])
    )
    bt = doc.get("backtest", {})
    ml_opts = SimplexOptions(max_iters=int(bt.get("nelder_mead_max_iters", 10_000)))
    backtest = BacktestConfig(
        min_df=int(bt.get("min_df", 40)),
        half_life_years=float(bt.get("half_life_years", 10.0)),
        horizons=int(bt.get("horizons", 8)),
        clock_checks_per_quarter=int(bt.get("clock_checks_per_quarter", 2)),
        start=_parse_date(bt.get("start")),
        end=_parse_date(bt.get("end")),
        realized_vintage=str(bt.get("realized_vintage", "latest")),
        ml_opts=ml_opts,
    )
    methodologies = tuple(doc.get("methodologies", ["LSR", "ARX1"]))
    for m in methodologies:
        if m not in ALL_METHODOLOGIES:
            raise ConfigError(
                f"unknown methodology {m!r}; supported: {', '.join(ALL_METHODOLOGIES)}"
            )
    output_dir = Path(doc.get("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = path.parent / output_dir
    return RunConfig(
        vintage_csvs=tuple(data.get("vintage_csvs", ()) or ()),
        schema=schema,
        pool=tuple(pool),
        families=families,
        backtest=backtest,
        methodologies=methodologies,
        output_dir=output_dir,
        parallel=int(doc.get("parallel", 1)),
        config_path=path,
    )


def load_reference_universe() -> tuple[tuple[VariableDef, ...], tuple[FamilyRule, ...]]:
    """The shipped variable pool reproducing the documented spec counts.

    The standard family spans 16 activity variants x 2^7 control subsets
    (2,048 specs); the sticky-flexible family swaps the CPI controls in for
    inflation expectations and oil, contributing 1,920 further unique specs.
    """
    ref = resources.files("latentpc.configs").joinpath("reference_universe.yaml")
    doc = yaml.safe_load(ref.read_text())
    pool = tuple(expand_variables(doc["variables"]))
    families = tuple(
        FamilyRule(name=f["name"], exclude_controls=tuple(f.get("exclude_controls", ())))
        for f in doc["families"]
    )
    return pool, families
