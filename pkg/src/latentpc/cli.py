"""Batch pipeline front end: ingest -> backtest -> evaluate -> report.

Every command takes a YAML run config.  The backtest grid is resumable
(existing profile CSVs are skipped unless --force) and deterministic: the
same inputs produce byte-identical outputs at any parallelism degree, since
each (spec, methodology) pair writes only its own file.
"""

from __future__ import annotations

import functools
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import backtest as bt
from . import evaluate as ev
from .config import RunConfig, load_run_config
from .report import render_figures
from .specgen import generate_specs, write_specs_csv
from .vintages import VintageError, load_vintage_store

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _load(config_path) -> RunConfig:
    return load_run_config(config_path)


def _load_store(cfg: RunConfig):
    paths = cfg.resolve_csv_paths()
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise VintageError(f"vintage CSV not found: {', '.join(missing)}")
    if not paths:
        raise VintageError("config lists no vintage CSVs")
    return load_vintage_store(paths, cfg.schema)


def _profile_path(outdir: Path, spec_id: str, methodology: str) -> Path:
    return outdir / "profiles" / f"{spec_id}__{methodology}.csv"


def _fit_path(outdir: Path, spec_id: str, methodology: str) -> Path:
    return outdir / "fits" / f"{spec_id}__{methodology}.json"


@functools.lru_cache(maxsize=2)
def _worker_state(config_path: str):
    cfg = _load(Path(config_path))
    store = _load_store(cfg)
    specs = {s.spec_id: s for s in generate_specs(cfg.pool, cfg.families)}
    return cfg, store, specs


def _run_pair(config_path: str, spec_id: str, methodology: str) -> tuple[str, str, str | None]:
    """Worker: backtest one (spec, methodology) pair and write its outputs."""
    try:
        cfg, store, specs = _worker_state(config_path)
        spec = specs[spec_id]
        defs = cfg.variable_defs()
        profiles = bt.run_backtest(spec, methodology, store, defs, cfg.backtest)
        profiles = bt.realize(profiles, store, defs[spec.dependent], cfg.backtest)
        out = _profile_path(cfg.output_dir, spec_id, methodology)
        out.parent.mkdir(parents=True, exist_ok=True)
        bt.write_profiles_csv(out, profiles)
        if profiles and profiles[-1].fit_doc is not None:
            fit_path = _fit_path(cfg.output_dir, spec_id, methodology)
            fit_path.parent.mkdir(parents=True, exist_ok=True)
            doc = {"origin": profiles[-1].origin.isoformat(), "fit": profiles[-1].fit_doc}
            fit_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return spec_id, methodology, None
    except Exception:
        return spec_id, methodology, traceback.format_exc()


@click.group()
def main() -> None:
    """Vintage-aware forecasting pipeline."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def ingest(config_path) -> None:
    """Load and validate all vintage CSVs; print per-series coverage."""
    try:
        cfg = _load(config_path)
        store = _load_store(cfg)
    except (VintageError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    needed = {sid for v in cfg.pool for sid in v.sources}
    missing = sorted(needed - set(store))
    for sid in sorted(store):
        info = store[sid].coverage_summary()
        click.echo(
            f"{info['series_id']}: {info['n_periods']} periods "
            f"[{info['first_period']} .. {info['last_period']}], "
            f"first release {info['first_release']}, "
            f"{info['revised_periods']} revised"
        )
    if missing:
        click.echo(f"error: series missing from store: {', '.join(missing)}", err=True)
        sys.exit(EXIT_CONFIG)
    specs = generate_specs(cfg.pool, cfg.families)
    click.echo(f"{len(store)} series loaded; {len(specs)} specifications in the pool")


@main.command(name="backtest")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--force", is_flag=True, help="recompute pairs with existing outputs")
@click.option("--parallel", type=int, default=None, help="worker processes")
@click.option("--only-spec", "only_spec", default=None, help="restrict to one spec id")
@click.option("--methodologies", default=None, help="comma-separated subset")
def backtest_cmd(config_path, force, parallel, only_spec, methodologies) -> None:
    """Run the rolling out-of-sample grid and write one profile CSV per pair."""
    try:
        cfg = _load(config_path)
        _load_store(cfg)
        specs = generate_specs(cfg.pool, cfg.families)
    except (VintageError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    methods = cfg.methodologies
    if methodologies:
        methods = tuple(m.strip() for m in methodologies.split(",") if m.strip())
        unknown = [m for m in methods if m not in bt.ALL_METHODOLOGIES]
        if unknown:
            click.echo(f"error: unknown methodologies: {', '.join(unknown)}", err=True)
            sys.exit(EXIT_CONFIG)
    if only_spec is not None:
        specs = [s for s in specs if s.spec_id == only_spec]
        if not specs:
            click.echo(f"error: spec {only_spec!r} not in the generated pool", err=True)
            sys.exit(EXIT_CONFIG)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_specs_csv(cfg.output_dir / "specs.csv", specs)

    work = []
    for spec in specs:
        for m in methods:
            if not force and _profile_path(cfg.output_dir, spec.spec_id, m).exists():
                continue
            work.append((spec.spec_id, m))
    n_parallel = parallel if parallel is not None else cfg.parallel
    config_str = str(Path(config_path).resolve())
    failures = []
    if n_parallel > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=n_parallel) as pool:
            futures = [pool.submit(_run_pair, config_str, s, m) for s, m in work]
            for fut in futures:
                spec_id, m, err = fut.result()
                if err:
                    failures.append((spec_id, m, err))
    else:
        for s, m in work:
            spec_id, m, err = _run_pair(config_str, s, m)
            if err:
                failures.append((spec_id, m, err))
    skipped = len(specs) * len(methods) - len(work)
    click.echo(
        f"backtest complete: {len(work) - len(failures)} pairs written, "
        f"{skipped} skipped (existing), {len(failures)} failed"
    )
    for spec_id, m, err in failures:
        click.echo(f"failed {spec_id}/{m}:\n{err}", err=True)
    if failures:
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def evaluate(config_path) -> None:
    """Aggregate profile CSVs into the report table and summary JSON."""
    try:
        cfg = _load(config_path)
        specs = generate_specs(cfg.pool, cfg.families)
    except (VintageError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    profile_dir = cfg.output_dir / "profiles"
    if not profile_dir.is_dir() or not any(profile_dir.glob("*.csv")):
        click.echo(f"error: no profiles found under {profile_dir}", err=True)
        sys.exit(EXIT_CONFIG)
    profiles_by_pair = {}
    for spec in specs:
        for m in cfg.methodologies:
            path = _profile_path(cfg.output_dir, spec.spec_id, m)
            if path.exists():
                profiles_by_pair[(spec.spec_id, m)] = bt.read_profiles_csv(
                    path, spec.spec_id, m
                )
    if not profiles_by_pair:
        click.echo("error: no profile CSVs match the configured grid", err=True)
        sys.exit(EXIT_CONFIG)
    horizons = list(range(1, cfg.backtest.horizons + 1))
    try:
        records = ev.evaluate_profiles(profiles_by_pair, horizons)
    except ev.AlignmentError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    spec_variables = {s.spec_id: list(s.variables()) for s in specs}
    summary = ev.summarize(records, spec_variables, horizons)
    ev.write_report_csv(cfg.output_dir / "report.csv", records)
    ev.write_summary_json(cfg.output_dir / "summary.json", summary)
    click.echo(
        f"evaluated {len(profiles_by_pair)} pairs: "
        f"report.csv and summary.json written to {cfg.output_dir}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def report(config_path) -> None:
    """Render summary figures next to the delimited output."""
    try:
        cfg = _load(config_path)
    except (VintageError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    summary_path = cfg.output_dir / "summary.json"
    if not summary_path.exists():
        click.echo(f"error: {summary_path} not found; run evaluate first", err=True)
        sys.exit(EXIT_CONFIG)
    summary = json.loads(summary_path.read_text())
    written = render_figures(summary, cfg.output_dir / "figures")
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
