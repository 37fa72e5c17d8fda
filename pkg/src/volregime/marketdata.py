"""Daily price ingestion, log returns, sliding windows and the chronological split.

Return index ``k`` holds ``r_k = ln(P_{k+1} / P_k)`` and is dated with price
``k + 1``.  A window sample ending at ``t`` uses returns ``t-w+1 .. t`` and
targets the realized variance at ``t + 1``.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import EmptyInputError, ParseError, PreconditionError, ValidationError

logger = logging.getLogger(__name__)

STOOQ_HEADER = ("Date", "Open", "High", "Low", "Close", "Volume")
DATE_CLOSE_HEADER = ("Date", "Close")
FORMATS = ("auto", "stooq", "date_close")


@dataclass(frozen=True)
class PricePoint:
    date: dt.date
    close: float

    def __post_init__(self):
        if not self.close > 0:
            raise ValidationError(f"non-positive close {self.close!r} on {self.date}")


@dataclass(frozen=True)
class PriceSeries:
    points: tuple[PricePoint, ...]
    reordered: bool = False  # input rows were not in date order
    source: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def closes(self) -> list[float]:
        return [p.close for p in self.points]

    @property
    def dates(self) -> list[dt.date]:
        return [p.date for p in self.points]


@dataclass(frozen=True)
class ReturnObservation:
    date: dt.date
    log_return: float
    realized_variance: float

    @classmethod
    def from_return(cls, date: dt.date, log_return: float) -> ReturnObservation:
        return cls(date, log_return, log_return * log_return)


@dataclass(frozen=True)
class WindowSample:
    end_index: int
    history: tuple[ReturnObservation, ...]
    target: float

    @property
    def target_index(self) -> int:
        return self.end_index + 1

    @property
    def start_index(self) -> int:
        return self.end_index - len(self.history) + 1

    @property
    def variances(self) -> list[float]:
        return [obs.realized_variance for obs in self.history]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    boundary_index: int  # last return index a training target may occupy
    n_train: int
    n_test: int


def decimal_fraction(x: float) -> Fraction:
    """Exact rational for the shortest decimal repr of ``x``.

    ``0.8 * 10`` should be 8, not the 8.000000000000000444 the binary
    value implies; products with counts go through this.
    """
    return Fraction(repr(float(x)))


def floor_share(fraction: float, n: int) -> int:
    return math.floor(decimal_fraction(fraction) * n)


def _sniff_layout(header: list[str]) -> str:
    cols = tuple(h.strip() for h in header)
    if cols == STOOQ_HEADER:
        return "stooq"
    if cols == DATE_CLOSE_HEADER:
        return "date_close"
    raise ParseError(f"unrecognised header {list(cols)!r}", line=1)


def load_prices(path, format: str = "auto") -> PriceSeries:
    """Read a daily close file.

    Only ``Date`` and ``Close`` are consumed.  Rows out of date order are
    sorted and the result is flagged ``reordered``; duplicate dates are an
    error.
    """
    if format not in FORMATS:
        raise PreconditionError(f"unknown format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path} is empty") from None
        layout = _sniff_layout(header)
        if format != "auto" and layout != format:
            raise ParseError(f"header is {layout!r} layout, expected {format!r}", line=1)
        cols = [h.strip() for h in header]
        i_date, i_close = cols.index("Date"), cols.index("Close")

        points = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(cols):
                raise ParseError(f"line {lineno}: expected {len(cols)} fields, got {len(row)}", line=lineno)
            try:
                date = dt.date.fromisoformat(row[i_date].strip())
                close = float(row[i_close])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}", line=lineno) from None
            if not math.isfinite(close):
                raise ParseError(f"line {lineno}: non-finite close", line=lineno)
            if close <= 0:
                raise ValidationError(f"line {lineno}: non-positive close {close!r}")
            points.append(PricePoint(date, close))

    if not points:
        raise EmptyInputError(f"{path} has no data rows")

    reordered = any(a.date > b.date for a, b in zip(points, points[1:]))
    if reordered:
        logger.warning("%s: rows not in date order; sorted", path)
        points.sort(key=lambda p: p.date)
    for a, b in zip(points, points[1:]):
        if a.date == b.date:
            raise ValidationError(f"duplicate date {a.date} in {path}")
    return PriceSeries(tuple(points), reordered=reordered, source=str(path))


def compute_returns(prices: PriceSeries) -> list[ReturnObservation]:
    points = prices.points if isinstance(prices, PriceSeries) else tuple(prices)
    if len(points) < 2:
        raise EmptyInputError("need at least two prices to form a return")
    return [
        ReturnObservation.from_return(cur.date, math.log(cur.close / prev.close))
        for prev, cur in zip(points, points[1:])
    ]


def build_windows(returns: list[ReturnObservation], w: int) -> list[WindowSample]:
    if w < 1:
        raise PreconditionError(f"window length must be positive, got {w}")
    if len(returns) < w + 1:
        raise EmptyInputError(f"{len(returns)} observations cannot fill a window of {w} plus a target")
    return [
        WindowSample(
            end_index=i + w - 1,
            history=tuple(returns[i : i + w]),
            target=returns[i + w].realized_variance,
        )
        for i in range(len(returns) - w)
    ]


def split_chronological(samples: list[WindowSample], train_fraction: float):
    """First ``floor(fraction * n)`` samples train, the rest test. No shuffling."""
    if not 0 < train_fraction < 1:
        raise PreconditionError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if not samples:
        raise EmptyInputError("no samples to split")
    n_train = floor_share(train_fraction, len(samples))
    train, test = list(samples[:n_train]), list(samples[n_train:])
    boundary = train[-1].target_index if train else samples[0].end_index
    spec = SplitSpec(train_fraction, boundary, len(train), len(test))
    return train, test, spec


def nearest_rank_quantile(values, q: float) -> float:
    """Nearest-rank quantile: the ``ceil(q * n)``-th smallest value (1-based)."""
    if not 0 <= q <= 1:
        raise PreconditionError(f"quantile level must lie in [0, 1], got {q}")
    ordered = sorted(values)
    if not ordered:
        raise EmptyInputError("quantile of an empty collection")
    rank = max(1, math.ceil(decimal_fraction(q) * len(ordered)))
    return ordered[rank - 1]


def training_quantile(train: list[WindowSample], q: float) -> float:
    if not train:
        raise EmptyInputError("training set is empty")
    return nearest_rank_quantile([s.target for s in train], q)
