"""End-to-end pipeline through the command line interface."""

import json
import shutil
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from latentpc.cli import main


def run_cli(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


def outdir_of(config_path: Path) -> Path:
    doc = yaml.safe_load(config_path.read_text())
    return config_path.parent / doc["output_dir"]


@pytest.fixture(scope="session")
def completed_run(economy_workspace):
    """ingest + backtest + evaluate + report executed once on the fixture."""
    cfg = str(economy_workspace)
    assert run_cli("ingest", "--config", cfg).exit_code == 0
    assert run_cli("backtest", "--config", cfg).exit_code == 0
    assert run_cli("evaluate", "--config", cfg).exit_code == 0
    assert run_cli("report", "--config", cfg).exit_code == 0
    return economy_workspace


class TestIngest:
    def test_lists_every_series(self, economy_workspace):
        result = run_cli("ingest", "--config", str(economy_workspace))
        assert result.exit_code == 0
        for sid in ("price_index", "indicator_a", "indicator_d"):
            assert sid in result.output

    def test_missing_file_exit_code(self, tmp_path, economy_workspace):
        doc = yaml.safe_load(economy_workspace.read_text())
        doc["data"]["vintage_csvs"] = ["nowhere/*.csv", "missing.csv"]
        bad = tmp_path / "bad.yaml"
        bad.write_text(yaml.safe_dump(doc))
        result = run_cli("ingest", "--config", str(bad))
        assert result.exit_code == 1
        assert "missing.csv" in result.output

    def test_duplicate_rows_exit_code(self, tmp_path, economy_workspace):
        doc = yaml.safe_load(economy_workspace.read_text())
        src = economy_workspace.parent / "data" / "price_index.csv"
        datadir = tmp_path / "data"
        datadir.mkdir()
        lines = src.read_text().splitlines()
        lines.append(lines[1])
        (datadir / "dup.csv").write_text("\n".join(lines) + "\n")
        doc["data"]["vintage_csvs"] = ["data/*.csv"]
        bad = tmp_path / "bad.yaml"
        bad.write_text(yaml.safe_dump(doc))
        result = run_cli("ingest", "--config", str(bad))
        assert result.exit_code == 1
        assert "duplicate" in result.output


class TestBacktest:
    def test_profile_files_exist(self, completed_run):
        out = outdir_of(completed_run)
        files = sorted((out / "profiles").glob("*.csv"))
        # 8 specs x 4 methodologies.
        assert len(files) == 32
        assert (out / "specs.csv").exists()
        header = files[0].read_text().splitlines()[0]
        assert header == "origin,horizon,prediction,realized,model_df,converged"

    def test_rerun_skips_existing(self, completed_run):
        out = outdir_of(completed_run)
        files = sorted((out / "profiles").glob("*.csv"))
        stamps = {f: f.stat().st_mtime_ns for f in files}
        result = run_cli("backtest", "--config", str(completed_run))
        assert result.exit_code == 0
        assert "0 pairs written" in result.output
        assert {f: f.stat().st_mtime_ns for f in files} == stamps

    def test_only_spec_and_methodologies_filters(self, completed_run, tmp_path):
        out = outdir_of(completed_run)
        spec_id = (out / "specs.csv").read_text().splitlines()[1].split(",")[0]
        doc = yaml.safe_load(completed_run.read_text())
        doc["output_dir"] = str(tmp_path / "filtered")
        cfg = tmp_path / "filtered.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        # Config paths are config-relative; keep data where the fixture put it.
        shutil.copytree(completed_run.parent / "data", tmp_path / "data")
        result = run_cli(
            "backtest",
            "--config",
            str(cfg),
            "--only-spec",
            spec_id,
            "--methodologies",
            "ARX1",
        )
        assert result.exit_code == 0
        files = list((tmp_path / "filtered" / "profiles").glob("*.csv"))
        assert [f.name for f in files] == [f"{spec_id}__ARX1.csv"]

    def test_parallel_outputs_byte_identical(self, completed_run, tmp_path):
        doc = yaml.safe_load(completed_run.read_text())
        shutil.copytree(completed_run.parent / "data", tmp_path / "data")
        outputs = {}
        for label, parallel in (("serial", 1), ("parallel", 4)):
            doc["output_dir"] = f"out_{label}"
            doc["methodologies"] = ["LSR", "ARX1"]
            cfg = tmp_path / f"{label}.yaml"
            cfg.write_text(yaml.safe_dump(doc))
            result = run_cli(
                "backtest", "--config", str(cfg), "--parallel", str(parallel)
            )
            assert result.exit_code == 0
            outputs[label] = tmp_path / f"out_{label}" / "profiles"
        serial = sorted(outputs["serial"].glob("*.csv"))
        parallel = sorted(outputs["parallel"].glob("*.csv"))
        assert [f.name for f in serial] == [f.name for f in parallel]
        for a, b in zip(serial, parallel):
            assert a.read_bytes() == b.read_bytes(), a.name

    def test_unknown_methodology_rejected(self, completed_run):
        result = run_cli(
            "backtest", "--config", str(completed_run), "--methodologies", "VAR99"
        )
        assert result.exit_code == 1

    def test_partial_failure_exit_code(self, completed_run, tmp_path):
        # A variable whose log transform hits negative data fails per-spec;
        # the run continues and exits 2.
        doc = yaml.safe_load(completed_run.read_text())
        shutil.copytree(completed_run.parent / "data", tmp_path / "data")
        for rec in doc["variables"]:
            if rec["name"] == "Indicator A":
                rec["steps"] = ["natural-log"]
        doc["output_dir"] = "out_broken"
        doc["methodologies"] = ["ARX1"]
        cfg = tmp_path / "broken.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        result = run_cli("backtest", "--config", str(cfg))
        assert result.exit_code == 2
        assert "failed" in result.output
        # Specs not involving the broken variable still produced output.
        written = list((tmp_path / "out_broken" / "profiles").glob("*.csv"))
        assert written


class TestEvaluate:
    def test_report_and_summary_written(self, completed_run):
        out = outdir_of(completed_run)
        report = out / "report.csv"
        summary = json.loads((out / "summary.json").read_text())
        header = report.read_text().splitlines()[0]
        assert header == (
            "spec_id,methodology,horizon,n_obs,mspe,rank,f_stat,p_value,improvement"
        )
        assert set(summary["methodologies"]) == {"LSR", "ARX1", "MA1", "EWMA"}
        assert summary["benchmark"] == "MA1"

    def test_summary_medians_match_recomputation(self, completed_run):
        import csv as csvmod
        import statistics

        out = outdir_of(completed_run)
        summary = json.loads((out / "summary.json").read_text())
        ranks = {}
        with open(out / "report.csv", newline="") as fh:
            for row in csvmod.DictReader(fh):
                if row["rank"]:
                    key = (row["methodology"], row["horizon"])
                    ranks.setdefault(key, []).append(int(row["rank"]))
        for (meth, horizon), values in ranks.items():
            expected = statistics.median(values)
            assert summary["median_rank"][meth][horizon] == pytest.approx(expected)

    def test_empty_profile_dir_is_error(self, completed_run, tmp_path):
        doc = yaml.safe_load(completed_run.read_text())
        doc["output_dir"] = str(tmp_path / "empty_out")
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        shutil.copytree(completed_run.parent / "data", tmp_path / "data")
        result = run_cli("evaluate", "--config", str(cfg))
        assert result.exit_code == 1


class TestReport:
    def test_figures_rendered(self, completed_run):
        out = outdir_of(completed_run)
        figures = {p.name for p in (out / "figures").glob("*.png")}
        assert {"median_rank.png", "rank1_share.png", "significance.png"} <= figures

    def test_report_before_evaluate_is_error(self, completed_run, tmp_path):
        doc = yaml.safe_load(completed_run.read_text())
        doc["output_dir"] = str(tmp_path / "no_eval")
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        result = run_cli("report", "--config", str(cfg))
        assert result.exit_code == 1
