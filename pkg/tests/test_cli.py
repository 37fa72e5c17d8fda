import csv
import io
import json
from pathlib import Path

import pytest

from volregime import experiment
from volregime.cli import main
from volregime.config import dump_config, load_config
from volregime.errors import ConfigurationError

CLASSICAL = "methods=rolling_mean,har,garch,gjr_garch"


@pytest.fixture
def cfg(tmp_path, data_dir):
    path = tmp_path / "exp.ini"
    path.write_text(
        "[data]\n"
        f"dataset_path = {data_dir / 'sim_index_174.csv'}\n"
        "dataset_name = sim174\n"
        "[pool]\nn = 40\nJ = 3\n"
        "[model]\nbackend = mock:corrective\nmax_in_flight = 4\n"
        f"[output]\noutput_dir = {tmp_path / 'run'}\n"
    )
    return path


def run(cfg, *args):
    return main([args[0], "--config", str(cfg), *args[1:]])


def out(cfg):
    return load_config(cfg).output_dir


def test_ingest_writes_artifacts(cfg, capsys):
    assert run(cfg, "ingest") == 0
    ingest = Path(out(cfg)) / "ingest"
    meta = json.loads((ingest / "split.json").read_text())
    assert (meta["n_train"], meta["n_test"]) == (116, 50)
    assert "116 train / 50 test" in capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO((ingest / "returns.csv").read_text())))
    assert len(rows) == 173
    assert all(float(r["realized_variance"]) == float(r["log_return"]) ** 2 for r in rows)


def test_ingest_idempotent(cfg):
    run(cfg, "ingest")
    first = (Path(out(cfg)) / "ingest" / "split.json").read_bytes()
    run(cfg, "ingest")
    assert (Path(out(cfg)) / "ingest" / "split.json").read_bytes() == first


def test_ingest_golden_file(tmp_path, data_dir):
    assert main(["ingest", "--set", f"dataset_path={data_dir / 'golden_stooq.csv'}",
                 "--set", "w=2", "--set", "m=1", "--output", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "ingest" / "returns.csv")))
    assert [r["date"] for r in rows] == ["2024-01-03", "2024-01-04", "2024-01-05", "2024-01-08"]


def test_missing_data_file(tmp_path, capsys):
    assert main(["ingest", "--set", f"dataset_path={tmp_path / 'nope.csv'}", "--output", str(tmp_path)]) == 1
    assert "nope.csv" in capsys.readouterr().err


def test_bad_override_is_config_error(cfg):
    assert run(cfg, "ingest", "--set", "no_such_key=1") == 2
    assert run(cfg, "ingest", "--set", "m=9") == 2


def test_build_pool_before_ingest(cfg):
    assert run(cfg, "build-pool") == 2


def test_build_pool_deterministic(cfg):
    run(cfg, "ingest")
    assert run(cfg, "build-pool", "--seed", "5") == 0
    first = (Path(out(cfg)) / "pool.jsonl").read_bytes()
    assert run(cfg, "build-pool", "--seed", "5") == 0
    assert (Path(out(cfg)) / "pool.jsonl").read_bytes() == first
    assert run(cfg, "build-pool", "--seed", "6") == 0
    assert (Path(out(cfg)) / "pool.jsonl").read_bytes() != first


def test_build_pool_n_exceeds_train(cfg, capsys):
    run(cfg, "ingest")
    assert run(cfg, "build-pool", "--set", "n=1000") == 0
    captured = capsys.readouterr()
    assert "exceeds 116" in captured.err and "wrote 116 demonstrations" in captured.out


def test_remote_without_key(cfg, monkeypatch, capsys):
    monkeypatch.delenv("VOLREGIME_API_KEY", raising=False)
    run(cfg, "ingest")
    assert run(cfg, "build-pool", "--backend", "remote", "--set", "endpoint=http://127.0.0.1:9/v1") == 2
    assert "VOLREGIME_API_KEY" in capsys.readouterr().err


def test_classical_evaluate_never_builds_a_gateway(cfg, monkeypatch):
    run(cfg, "ingest")

    def forbidden(*a, **k):
        raise AssertionError("gateway requested")

    monkeypatch.setattr(experiment, "make_gateway", forbidden)
    assert run(cfg, "evaluate", "--set", CLASSICAL, "--backend", "remote") == 0
    metrics = (Path(out(cfg)) / "metrics.csv").read_text().splitlines()
    assert [row.split(",")[1] for row in metrics[1:]] == ["rolling_mean", "har", "garch", "gjr_garch"]
    assert json.loads((Path(out(cfg)) / "baselines.json").read_text())["garch"]["beta"] > 0


def test_icl_without_pool_fails_that_method(cfg, capsys):
    run(cfg, "ingest")
    code = run(cfg, "evaluate", "--set", "methods=rolling_mean,random")
    assert code == 1
    assert "build-pool" in capsys.readouterr().err
    assert "rolling_mean" in (Path(out(cfg)) / "metrics.csv").read_text()


def test_cheating_oracle_end_to_end(cfg):
    run(cfg, "ingest")
    args = ("--backend", "mock:cheating_oracle")
    assert run(cfg, "build-pool", *args) == 0
    assert run(cfg, "evaluate", *args, "--set", "methods=one_shot,random,fixed_prior,label_estimate") == 0
    text = (Path(out(cfg)) / "metrics.csv").read_text()
    for row in csv.DictReader(io.StringIO(text)):
        assert float(row["mae"]) == 0.0 and float(row["rmse"]) == 0.0
    assert "| sim174 | Regime-aware (label estimate) | 0.00 | 0.00 |" in (Path(out(cfg)) / "report.md").read_text()


def test_evaluate_rerun_byte_identical(cfg):
    run(cfg, "ingest")
    run(cfg, "build-pool")
    assert run(cfg, "evaluate") == 0
    files = {n: (Path(out(cfg)) / n).read_bytes() for n in ("metrics.csv", "report.md", "predictions.csv")}
    assert run(cfg, "evaluate") == 0
    assert {n: (Path(out(cfg)) / n).read_bytes() for n in files} == files


def test_markdown_matches_csv(cfg):
    run(cfg, "ingest")
    run(cfg, "build-pool")
    run(cfg, "evaluate")
    md = (Path(out(cfg)) / "report.md").read_text()
    for row in csv.DictReader(io.StringIO((Path(out(cfg)) / "metrics.csv").read_text())):
        assert f"| {row['mae'] and format(float(row['mae']) * 1e4, '.2f')} |" in md


def test_report_regenerates_markdown(cfg, capsys):
    run(cfg, "ingest")
    run(cfg, "evaluate", "--set", CLASSICAL)
    md = (Path(out(cfg)) / "report.md").read_bytes()
    (Path(out(cfg)) / "report.md").unlink()
    capsys.readouterr()
    assert run(cfg, "report") == 0
    assert (Path(out(cfg)) / "report.md").read_bytes() == md
    assert "GJR-GARCH" in capsys.readouterr().out


def test_report_without_metrics(cfg):
    assert run(cfg, "report") == 2


def test_config_round_trip(cfg, tmp_path):
    config = load_config(cfg, ["K=4", "alpha=0.4", "methods=har,random"])
    again = tmp_path / "again.ini"
    again.write_text(dump_config(config))
    assert load_config(again) == config


def test_config_section_mismatch(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[pool]\nK = 3\n")
    with pytest.raises(ConfigurationError):
        load_config(bad)
