"""End-to-end experiment stages shared by the CLI, scripts and tests.

Stages write into ``config.output_dir``::

    ingest/returns.csv   ingest/windows.csv   ingest/split.json
    pool.jsonl
    baselines.json  predictions.csv  metrics.csv  report.md
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import fit_garch, fit_har
from .config import ExperimentConfig
from .errors import ConfigurationError, ValidationError, VolRegimeError
from .evaluator import compute_metrics, render_csv, render_markdown, run_backtest
from .forecast import LABELS, LLM_METHODS, garch_method, har_method, icl_method, one_shot_method, rolling_mean_method
from .gateway import Gateway, MockModel, RemoteBackend, ReplayBackend, parse_backend_spec
from .marketdata import (
    ReturnObservation,
    SplitSpec,
    build_windows,
    compute_returns,
    load_prices,
    split_chronological,
    training_quantile,
)
from .poolbuilder import DemoPool, build_pool, load_pool, save_pool
from .promptcodec import render_input
from .sampler import SamplerConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    name: str
    returns: tuple[ReturnObservation, ...]
    samples: tuple
    train: tuple
    test: tuple
    split: SplitSpec
    tau: float


def prepare(returns, w: int, train_fraction: float, q: float, name: str = "") -> Dataset:
    returns = tuple(returns)
    samples = build_windows(list(returns), w)
    train, test, split = split_chronological(samples, train_fraction)
    tau = training_quantile(train, q)
    return Dataset(name, returns, tuple(samples), tuple(train), tuple(test), split, tau)


def load_dataset(config: ExperimentConfig) -> Dataset:
    if not config.dataset_path:
        raise ConfigurationError("no dataset_path configured")
    prices = load_prices(config.dataset_path, config.dataset_format)
    return prepare(compute_returns(prices), config.w, config.train_fraction, config.q, config.dataset_id)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _returns_csv(returns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "date", "log_return", "realized_variance"])
    for k, obs in enumerate(returns):
        writer.writerow([k, obs.date.isoformat(), repr(obs.log_return), repr(obs.realized_variance)])
    return buf.getvalue()


def _windows_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["end_index", "start_index", "target_index", "target", "split"])
    n_train = ds.split.n_train
    for i, s in enumerate(ds.samples):
        writer.writerow([s.end_index, s.start_index, s.target_index, repr(s.target),
                         "train" if i < n_train else "test"])
    return buf.getvalue()


def write_ingest(ds: Dataset, config: ExperimentConfig) -> dict:
    out = Path(config.output_dir) / "ingest"
    out.mkdir(parents=True, exist_ok=True)
    returns_text, windows_text = _returns_csv(ds.returns), _windows_csv(ds)
    (out / "returns.csv").write_text(returns_text)
    (out / "windows.csv").write_text(windows_text)
    meta = {
        "dataset": ds.name,
        "w": config.w,
        "train_fraction": config.train_fraction,
        "q": config.q,
        "tau": ds.tau,
        "boundary_index": ds.split.boundary_index,
        "n_train": ds.split.n_train,
        "n_test": ds.split.n_test,
        "sha256": {"returns.csv": _sha256(returns_text), "windows.csv": _sha256(windows_text)},
    }
    (out / "split.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta


def read_ingest(config: ExperimentConfig) -> Dataset:
    out = Path(config.output_dir) / "ingest"
    meta_path = out / "split.json"
    if not meta_path.exists():
        raise ConfigurationError(f"no ingest artifact in {out}; run `ingest` first")
    meta = json.loads(meta_path.read_text())
    returns_text = (out / "returns.csv").read_text()
    if _sha256(returns_text) != meta["sha256"]["returns.csv"]:
        raise ValidationError(f"{out / 'returns.csv'} does not match its recorded checksum")
    returns = []
    for row in csv.DictReader(io.StringIO(returns_text)):
        obs = ReturnObservation(dt.date.fromisoformat(row["date"]), float(row["log_return"]),
                                float(row["realized_variance"]))
        if obs.realized_variance != obs.log_return * obs.log_return:
            raise ValidationError(f"row {row['index']}: realized variance is not the squared return")
        returns.append(obs)
    if (meta["w"], meta["train_fraction"], meta["q"]) != (config.w, config.train_fraction, config.q):
        raise ConfigurationError("ingest artifact was built with different w/train_fraction/q; rerun ingest")
    return prepare(returns, config.w, config.train_fraction, config.q, meta["dataset"])


def make_gateway(config: ExperimentConfig, ds: Dataset | None = None) -> Gateway:
    kind, variant, value = parse_backend_spec(config.backend)
    if kind == "remote":
        backend = RemoteBackend(config.endpoint, config.model, timeout=config.timeout,
                                max_retries=config.max_retries)
    else:
        kw = {}
        if value is not None:
            kw["value"] = value
        if variant == "cheating_oracle":
            if ds is None:
                raise ConfigurationError("cheating_oracle mock needs the dataset")
            kw["truths"] = {render_input(s).text: s.target for s in ds.samples}
        backend = MockModel.of(variant, seed=config.pool_seed, **kw)
    if config.cassette:
        backend = ReplayBackend(config.cassette, inner=backend)
    return Gateway(backend, max_in_flight=config.max_in_flight, max_reply_tokens=config.max_reply_tokens)


def construct_pool(ds: Dataset, config: ExperimentConfig, gateway: Gateway) -> DemoPool:
    return build_pool(ds.train, gateway, n=config.n, J=config.J, tau=ds.tau, seed=config.pool_seed,
                      m=config.m, created_from=ds.name)


def sampler_config(config: ExperimentConfig, strategy: str) -> SamplerConfig:
    return SamplerConfig(strategy=strategy, K=config.K, alpha=config.alpha, alpha_low=config.alpha_low,
                         alpha_high=config.alpha_high, m=config.m, tau_prime=config.tau_prime,
                         seed=config.sampler_seed)


def fit_baselines(ds: Dataset, config: ExperimentConfig) -> dict:
    """Fit HAR and both GARCH variants on the training period only.

    The training period is returns ``0..boundary_index``; nothing later is seen.
    """
    train_returns = ds.returns[: ds.split.boundary_index + 1]
    r = np.array([o.log_return for o in train_returns])
    fitted = {"initial_variance": float(np.var(r))}
    fitted["har"] = fit_har(train_returns)
    fitted["garch"], fitted["garch_diag"] = fit_garch(r, asymmetric=False, seed=config.garch_seed)
    fitted["gjr_garch"], fitted["gjr_garch_diag"] = fit_garch(r, asymmetric=True, seed=config.garch_seed)
    return fitted


def baselines_json(fitted: dict) -> str:
    doc = {k: asdict(v) for k, v in fitted.items() if k != "initial_variance"}
    doc["initial_variance"] = fitted["initial_variance"]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def build_methods(ds: Dataset, config: ExperimentConfig, pool: DemoPool | None, gateway: Gateway | None):
    """Method name -> per-sample forecaster, or an exception explaining why it is unavailable."""
    methods, fitted = {}, None
    for name in config.methods:
        try:
            if name == "rolling_mean":
                methods[name] = rolling_mean_method()
            elif name in ("har", "garch", "gjr_garch"):
                fitted = fitted or fit_baselines(ds, config)
                if name == "har":
                    methods[name] = har_method(fitted["har"], ds.returns)
                else:
                    methods[name] = garch_method(fitted[name], ds.returns, fitted["initial_variance"])
            elif gateway is None:
                raise ConfigurationError(f"{name} needs a model backend")
            elif name == "one_shot":
                methods[name] = one_shot_method(gateway)
            elif pool is None:
                raise ConfigurationError(f"{name} needs a demonstration pool; run `build-pool` first")
            else:
                methods[name] = icl_method(pool, sampler_config(config, name), gateway)
        except VolRegimeError as exc:
            methods[name] = exc
    return methods, fitted


@dataclass
class EvaluationResult:
    reports: list
    records: dict
    failures: dict
    fitted: dict | None

    @property
    def ok(self) -> bool:
        return not self.failures


def evaluate(ds: Dataset, config: ExperimentConfig, pool: DemoPool | None = None,
             gateway: Gateway | None = None) -> EvaluationResult:
    methods, fitted = build_methods(ds, config, pool, gateway)
    reports, records, failures = [], {}, {}
    workers = gateway.max_in_flight if gateway is not None else 1
    for name in config.methods:
        method = methods[name]
        if isinstance(method, Exception):
            failures[name] = str(method)
            continue
        try:
            recs = run_backtest(ds.test, method, ds.tau, name=name,
                                workers=workers if name in LLM_METHODS else 1)
        except VolRegimeError as exc:
            failures[name] = str(exc)
            continue
        records[name] = recs
        reports.append(compute_metrics(recs, ds.tau))
    return EvaluationResult(reports, records, failures, fitted)


def predictions_csv(result: EvaluationResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "end_index", "prediction", "truth", "regime_true", "flags", "demo_sources"])
    for name, recs in result.records.items():
        for r in recs:
            writer.writerow([name, r.end_index, repr(r.prediction), repr(r.truth), r.regime_true,
                             ";".join(sorted(r.flags)), ";".join(map(str, r.demo_sources))])
    return buf.getvalue()


def labelled(reports):
    """Copies of the reports with display names for the Markdown table."""
    return [replace(r, method=LABELS.get(r.method, r.method)) for r in reports]


def write_evaluation(result: EvaluationResult, ds: Dataset, config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    markdown = metrics = ""
    if result.reports:
        markdown = render_markdown(labelled(result.reports), ds.name)
        metrics = render_csv(result.reports, ds.name)
    if result.failures:
        markdown += "\nFailed methods:\n\n" + "".join(
            f"- {name}: {msg}\n" for name, msg in result.failures.items())
    (out / "report.md").write_text(markdown)
    (out / "metrics.csv").write_text(metrics)
    (out / "predictions.csv").write_text(predictions_csv(result))
    if result.fitted:
        (out / "baselines.json").write_text(baselines_json(result.fitted))
    return out


def pool_path(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / "pool.jsonl"


def maybe_load_pool(config: ExperimentConfig) -> DemoPool | None:
    path = pool_path(config)
    return load_pool(path) if path.exists() else None


def write_pool(pool: DemoPool, config: ExperimentConfig) -> Path:
    path = pool_path(config)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_pool(pool, path)
    return path
