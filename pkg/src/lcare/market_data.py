"""Price ingestion, return construction and descriptive statistics."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, asdict
from datetime import date, datetime
from typing import Iterable, TextIO

import numpy as np

from .errors import (
    DegenerateVariance,
    DuplicateDate,
    InsufficientData,
    MalformedRow,
    NonPositivePrice,
)

RETURN_KINDS = ("simple", "log")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PriceSeries:
    dates: np.ndarray  # datetime64[D]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        object.__setattr__(self, "prices", _frozen(self.prices, float))
        if self.dates.shape != self.prices.shape:
            raise ValueError("dates and prices differ in length")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        if np.any(~(self.prices > 0)):
            raise ValueError("prices must be positive")

    def __len__(self):
        return len(self.prices)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    dates: np.ndarray
    values: np.ndarray
    kind: str = "simple"

    def __post_init__(self):
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        object.__setattr__(self, "values", _frozen(self.values, float))
        if self.dates.shape != self.values.shape:
            raise ValueError("dates and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("returns must be finite")
        if self.kind not in RETURN_KINDS:
            raise ValueError(f"unknown return kind {self.kind!r}")

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_values(cls, values, start="2000-01-03", kind="simple"):
        """Wrap a bare array with consecutive business-day dates (for simulations)."""
        values = np.asarray(values, dtype=float)
        dates = np.busday_offset(np.datetime64(start, "D"), np.arange(len(values)), roll="forward")
        return cls(dates, values, kind)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    min: float
    max: float
    std: float
    skewness: float
    kurtosis: float

    def as_dict(self):
        return asdict(self)


def _parse_date(text, fmt):
    if fmt is None:
        return date.fromisoformat(text.strip())
    return datetime.strptime(text.strip(), fmt).date()


def load_prices(source: TextIO | str | os.PathLike, date_col="date", price_col="price",
                date_format=None) -> PriceSeries:
    """Read a headed CSV stream into a validated, date-sorted PriceSeries.

    ``source`` is a text stream, a path object, or a string holding the CSV
    content. Row numbers in errors count the header as row 1.
    """
    if isinstance(source, os.PathLike):
        with open(source, newline="") as fh:
            return load_prices(fh, date_col, price_col, date_format)
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise MalformedRow(1, "missing header")
    for col in (date_col, price_col):
        if col not in reader.fieldnames:
            raise MalformedRow(1, f"column {col!r} not in header {reader.fieldnames}")

    seen = {}
    for rownum, row in enumerate(reader, start=2):
        raw_d, raw_p = row.get(date_col), row.get(price_col)
        if raw_d is None or raw_p is None or not raw_d.strip() or not raw_p.strip():
            raise MalformedRow(rownum, "empty date or price field")
        try:
            d = _parse_date(raw_d, date_format)
            p = float(raw_p)
        except ValueError as exc:
            raise MalformedRow(rownum, str(exc)) from None
        if not math.isfinite(p):
            raise MalformedRow(rownum, f"non-finite price {raw_p!r}")
        if p <= 0:
            raise NonPositivePrice(rownum, f"price {p} is not positive")
        if d in seen:
            raise DuplicateDate(rownum, f"date {d} already seen on row {seen[d][0]}")
        seen[d] = (rownum, p)

    if not seen:
        raise InsufficientData("no price rows in input")
    ordered = sorted(seen.items())
    return PriceSeries([np.datetime64(d, "D") for d, _ in ordered], [p for _, (_, p) in ordered])


def to_returns(prices: PriceSeries, kind="simple") -> ReturnSeries:
    if kind not in RETURN_KINDS:
        raise ValueError(f"unknown return kind {kind!r}")
    if len(prices) < 2:
        raise InsufficientData("need at least 2 prices to form a return")
    p = prices.prices
    if kind == "simple":
        r = p[1:] / p[:-1] - 1.0
    else:
        r = np.log(p[1:] / p[:-1])
    return ReturnSeries(prices.dates[1:], r, kind)


def summarize(returns: ReturnSeries | Iterable[float]) -> SummaryStats:
    """Table-style moments: sample std (n-1), non-excess kurtosis."""
    x = returns.values if isinstance(returns, ReturnSeries) else np.asarray(list(returns), dtype=float)
    if x.size == 0:
        raise InsufficientData("cannot summarize an empty series")
    mean = x.mean()
    d = x - mean
    m2 = np.mean(d**2)
    if m2 <= 0.0:
        raise DegenerateVariance("zero variance: skewness and kurtosis undefined")
    m3 = np.mean(d**3)
    m4 = np.mean(d**4)
    std = math.sqrt(np.sum(d**2) / (x.size - 1)) if x.size > 1 else 0.0
    return SummaryStats(
        mean=float(mean),
        median=float(np.median(x)),
        min=float(x.min()),
        max=float(x.max()),
        std=std,
        skewness=float(m3 / m2**1.5),
        kurtosis=float(m4 / m2**2),
    )


def window(returns: ReturnSeries, end_index: int, length: int) -> ReturnSeries:
    start = end_index - length + 1
    if length < 1 or start < 0 or end_index >= len(returns):
        raise IndexError(f"window [{start}, {end_index}] outside series of length {len(returns)}")
    sl = slice(start, end_index + 1)
    return ReturnSeries(returns.dates[sl], returns.values[sl], returns.kind)


def write_prices_csv(dates, prices, stream: TextIO, date_col="date", price_col="price"):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow([date_col, price_col])
    for d, p in zip(dates, prices):
        w.writerow([str(np.datetime64(d, "D")), repr(float(p))])
