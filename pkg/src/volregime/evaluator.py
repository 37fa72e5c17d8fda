"""Backtest loop, overall and regime-wise error metrics, and report rendering."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

from .baselines import rolling_mean_forecast
from .errors import BacktestError, EmptyInputError, ValidationError
from .poolbuilder import HIGH, LOW, regime_label

logger = logging.getLogger(__name__)

DISPLAY_SCALE = 1e4
CSV_COLUMNS = ("dataset", "method", "mae", "rmse", "mae_low", "mae_high", "n_low", "n_high")

CLAMPED, SHORTFALL, FALLBACK = "clamped", "shortfall", "fallback"


@dataclass(frozen=True)
class Prediction:
    value: float
    flags: frozenset = frozenset()
    demo_sources: tuple[int, ...] = ()


@dataclass(frozen=True)
class ForecastRecord:
    end_index: int
    method: str
    prediction: float
    truth: float
    regime_true: str
    flags: frozenset = field(default_factory=frozenset)
    demo_sources: tuple[int, ...] = ()

    def __post_init__(self):
        if self.regime_true not in (HIGH, LOW):
            raise ValidationError(f"bad regime {self.regime_true!r}")
        if not (self.prediction >= 0 and self.truth >= 0):
            raise ValidationError(f"negative or NaN value in record at {self.end_index}")


@dataclass(frozen=True)
class MetricsReport:
    method: str
    mae: float
    rmse: float
    mae_low: float | None
    mae_high: float | None
    n_low: int
    n_high: int
    n_flagged: int = 0
    scale_note: str = "x1e4 for display"

    @property
    def n(self) -> int:
        return self.n_low + self.n_high


def compute_metrics(records, tau: float) -> MetricsReport:
    """MAE and RMSE overall, and MAE on each side of ``tau``.

    An empty regime partition gives ``None`` for that regime's MAE.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no records to score")
    methods = {r.method for r in records}
    if len(methods) > 1:
        raise ValidationError(f"records mix methods {sorted(methods)}")
    abs_low, abs_high, sq = [], [], []
    for r in records:
        err = r.prediction - r.truth
        (abs_high if r.truth >= tau else abs_low).append(abs(err))
        sq.append(err * err)
    n_low, n_high = len(abs_low), len(abs_high)
    n = n_low + n_high
    mae_low = math.fsum(abs_low) / n_low if n_low else None
    mae_high = math.fsum(abs_high) / n_high if n_high else None
    # overall MAE is defined as the count-weighted mean of the regime MAEs
    mae = ((n_low * mae_low if n_low else 0.0) + (n_high * mae_high if n_high else 0.0)) / n
    rmse = math.sqrt(math.fsum(sq) / n)
    # sqrt rounding can land one ulp under the mean when all errors are equal
    rmse = max(rmse, mae)
    flagged = sum(1 for r in records if r.flags)
    return MetricsReport(records[0].method, mae, rmse, mae_low, mae_high, n_low, n_high, flagged)


def run_backtest(samples, method: Callable, tau: float, name: str = "method", workers: int = 1):
    """One forecast per test sample, in chronological order.

    ``method(sample)`` returns a float or a ``Prediction``.  A failing sample
    falls back to the rolling mean of its own window and is flagged; if every
    sample fails the backtest raises.
    """
    samples = sorted(samples, key=lambda s: s.end_index)
    if not samples:
        raise EmptyInputError("no test samples")

    def one(sample):
        try:
            out = method(sample)
            pred = out if isinstance(out, Prediction) else Prediction(float(out))
            if not (math.isfinite(pred.value) and pred.value >= 0):
                raise ValueError(f"invalid prediction {pred.value!r}")
            return pred, False
        except Exception as exc:  # noqa: BLE001 -- any per-sample failure is recorded, not fatal
            logger.warning("%s failed on sample %d: %s", name, sample.end_index, exc)
            return Prediction(rolling_mean_forecast(sample.variances), frozenset({FALLBACK})), True

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, samples))
    else:
        outcomes = [one(s) for s in samples]

    if all(failed for _, failed in outcomes):
        raise BacktestError(f"{name} failed on all {len(samples)} samples")
    return [
        ForecastRecord(s.end_index, name, p.value, s.target, regime_label(s.target, tau),
                       frozenset(p.flags), tuple(p.demo_sources))
        for s, (p, _) in zip(samples, outcomes)
    ]


def _cell(value) -> str:
    return "n/a" if value is None else f"{value * DISPLAY_SCALE:.2f}"


def render_markdown(reports, dataset: str = "") -> str:
    reports = list(reports)
    if not reports:
        raise EmptyInputError("no reports to render")
    lines = [
        "| Dataset | Method | MAE | RMSE | MAE_low | MAE_high |",
        "|---|---|---|---|---|---|",
    ]
    for rep in reports:
        lines.append(f"| {dataset} | {rep.method} | {_cell(rep.mae)} | {_cell(rep.rmse)} | "
                     f"{_cell(rep.mae_low)} | {_cell(rep.mae_high)} |")
    lines.append("")
    lines.append("All values x1e4.")
    return "\n".join(lines) + "\n"


def render_csv(reports, dataset: str = "") -> str:
    reports = list(reports)
    if not reports:
        raise EmptyInputError("no reports to render")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow([dataset, rep.method, repr(rep.mae), repr(rep.rmse),
                         "" if rep.mae_low is None else repr(rep.mae_low),
                         "" if rep.mae_high is None else repr(rep.mae_high),
                         rep.n_low, rep.n_high])
    return buf.getvalue()


def render_report(reports, dataset: str = ""):
    """``(markdown, csv)`` for the given per-method reports, in the given order."""
    return render_markdown(reports, dataset), render_csv(reports, dataset)


def read_metrics_csv(text: str):
    """Inverse of ``render_csv``: ``(dataset, [MetricsReport, ...])``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    opt = lambda s: float(s) if s else None  # noqa: E731
    reports = [MetricsReport(r["method"], float(r["mae"]), float(r["rmse"]), opt(r["mae_low"]),
                             opt(r["mae_high"]), int(r["n_low"]), int(r["n_high"])) for r in rows]
    return (rows[0]["dataset"] if rows else ""), reports
