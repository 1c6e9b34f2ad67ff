"""Loading, writing and synthesizing meter and price data.

File formats
------------
Meter CSV: header ``consumer_id,date,h00,...,h23``, one row per consumer-day,
dates ISO-8601 and consecutive per consumer, values in kWh written with
exactly 4 fractional digits.

Price CSV: a metadata first line ``#unit=cents_per_kwh`` or
``#unit=usd_per_mwh``, then header ``date,market,h00,...,h23`` with market
``DA`` or ``RT``. Values are converted to cents/kWh on load
(1 $/MWh = 0.1 cents/kWh).

Timezone/DST handling is out of scope: every day must already have exactly
24 slots.
"""

from __future__ import annotations

import csv
import datetime as dt
import os
from dataclasses import dataclass

import numpy as np

from .types import HOURS, ConsumerSeries, Dataset, HourlyMatrix, PriceSeries

_HOUR_COLS = [f"h{h:02d}" for h in range(HOURS)]
METER_HEADER = ["consumer_id", "date"] + _HOUR_COLS
PRICE_HEADER = ["date", "market"] + _HOUR_COLS

_UNIT_SCALE = {"cents_per_kwh": 1.0, "usd_per_mwh": 0.1}

# Default chronological split: three quarters of the days are history.
DEFAULT_TRAIN_SPLIT = 0.75


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for an archetype-based synthetic population."""

    n_consumers: int
    n_days: int
    fraction_peaky: float = 0.5
    base_kwh_per_day: float = 10.0
    noise_cv: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_consumers < 1:
            raise ValueError("n_consumers must be >= 1")
        if self.n_days < 2:
            raise ValueError("n_days must be >= 2")
        if not (0.0 <= self.fraction_peaky <= 1.0):
            raise ValueError("fraction_peaky must be in [0, 1]")
        if self.base_kwh_per_day <= 0:
            raise ValueError("base_kwh_per_day must be > 0")
        if self.noise_cv < 0:
            raise ValueError("noise_cv must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def _parse_date(text: str, lineno: int, path: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ValueError(f"{path}: bad date {text!r} at row {lineno}") from None


def _parse_hours(cells: list[str], lineno: int, path: str) -> np.ndarray:
    try:
        values = np.array([float(c) for c in cells], dtype=np.float64)
    except ValueError:
        raise ValueError(f"{path}: non-numeric reading at row {lineno}") from None
    if np.any(values < 0):
        raise ValueError(f"{path}: negative reading at row {lineno}")
    return values


def _check_consecutive(dates: list[dt.date], label: str):
    for prev, cur in zip(dates, dates[1:]):
        expected = prev + dt.timedelta(days=1)
        if cur == prev:
            raise ValueError(f"{label}: duplicate date {cur.isoformat()}")
        if cur < expected:
            raise ValueError(f"{label}: dates out of order at {cur.isoformat()}")
        if cur > expected:
            raise ValueError(f"{label}: gap at {expected.isoformat()}")


def load_meter_csv(path) -> list[ConsumerSeries]:
    """Load one ConsumerSeries per distinct consumer_id from a meter CSV."""
    path = str(path)
    rows_by_consumer: dict[str, list[tuple[dt.date, np.ndarray]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METER_HEADER:
            raise ValueError(f"{path}: expected meter header {','.join(METER_HEADER[:3])},...")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(METER_HEADER):
                raise ValueError(f"{path}: wrong column count at row {lineno}")
            cid = row[0]
            date = _parse_date(row[1], lineno, path)
            values = _parse_hours(row[2:], lineno, path)
            rows_by_consumer.setdefault(cid, []).append((date, values))

    if not rows_by_consumer:
        raise ValueError(f"{path}: no meter rows")
    out = []
    for cid, day_rows in rows_by_consumer.items():
        dates = [d for d, _ in day_rows]
        _check_consecutive(dates, f"consumer {cid}")
        matrix = np.vstack([v for _, v in day_rows])
        out.append(ConsumerSeries(cid, HourlyMatrix(matrix, dates[0])))
    return out


def load_price_csv(path) -> PriceSeries:
    """Load aligned DA/RT prices, converting to cents/kWh per the unit line."""
    path = str(path)
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("#unit="):
            raise ValueError(f"{path}: missing #unit= metadata line")
        unit = first[len("#unit="):]
        if unit not in _UNIT_SCALE:
            raise ValueError(f"{path}: unknown price unit {unit!r}")
        scale = _UNIT_SCALE[unit]
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PRICE_HEADER:
            raise ValueError(f"{path}: expected price header {','.join(PRICE_HEADER[:3])},...")
        markets: dict[str, list[tuple[dt.date, np.ndarray]]] = {"DA": [], "RT": []}
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(PRICE_HEADER):
                raise ValueError(f"{path}: wrong column count at row {lineno}")
            date = _parse_date(row[0], lineno, path)
            market = row[1]
            if market not in markets:
                raise ValueError(f"{path}: unknown market {market!r} at row {lineno}")
            markets[market].append((date, _parse_hours(row[2:], lineno, path) * scale))

    for name, rows in markets.items():
        if not rows:
            raise ValueError(f"{path}: no {name} rows")
        _check_consecutive([d for d, _ in rows], f"{name} market")
    da_dates = [d for d, _ in markets["DA"]]
    rt_dates = [d for d, _ in markets["RT"]]
    if da_dates != rt_dates:
        raise ValueError(f"{path}: market date ranges differ")
    da = np.vstack([v for _, v in markets["DA"]])
    rt = np.vstack([v for _, v in markets["RT"]])
    return PriceSeries(HourlyMatrix(da, da_dates[0]), HourlyMatrix(rt, rt_dates[0]))


def _atomic_write(path, write_rows):
    """Write a text file via temp+rename so readers never see partial output."""
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        write_rows(fh)
    os.replace(tmp, path)


def write_meter_csv(consumers: list[ConsumerSeries], path):
    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(METER_HEADER)
        for c in consumers:
            for row in range(c.usage.n_days):
                date = c.usage.date_of_row(row).isoformat()
                cells = [f"{v:.4f}" for v in c.usage.values[row]]
                writer.writerow([c.consumer_id, date] + cells)

    _atomic_write(path, _write)


def write_price_csv(prices: PriceSeries, path):
    def _write(fh):
        fh.write("#unit=cents_per_kwh\n")
        writer = csv.writer(fh)
        writer.writerow(PRICE_HEADER)
        for market, matrix in (("DA", prices.day_ahead), ("RT", prices.real_time)):
            for row in range(matrix.n_days):
                date = matrix.date_of_row(row).isoformat()
                writer.writerow([date, market] + [f"{v:.4f}" for v in matrix.values[row]])

    _atomic_write(path, _write)


def _archetype_shape(peaky: bool) -> np.ndarray:
    """Normalized daily load shape: an evening or a night bump over a flat floor."""
    hours = np.arange(HOURS, dtype=np.float64)
    center = 18.0 if peaky else 3.0
    shape = 0.15 + np.exp(-((hours - center) ** 2) / 6.0)
    return shape / shape.sum()


def _price_peak() -> np.ndarray:
    hours = np.arange(HOURS, dtype=np.float64)
    return np.exp(-((hours - 18.0) ** 2) / 8.0)


def synth_population(spec: SynthSpec, split: float = DEFAULT_TRAIN_SPLIT) -> Dataset:
    """Generate a deterministic archetype population with aligned prices.

    The first round(fraction_peaky * n) consumers use an evening load shape
    aligned with the afternoon price peak; the rest use a night shape. Each
    consumer-day gets an independent multiplicative log-normal factor with
    mean 1 and coefficient of variation ``noise_cv``. The day-ahead price is
    2 + 4*exp(-(h-18)^2/8) cents/kWh with a mildly day-varying peak
    amplitude; the real-time price adds zero-mean Gaussian noise truncated
    at 0. All values are quantized to 4 decimals, matching the CSV encoding,
    so a write/load round trip is exact.

    Draws from the seeded generator happen in a fixed order (day multipliers,
    price amplitudes, real-time noise), so equal specs yield byte-identical
    datasets.
    """
    rng = np.random.default_rng(spec.seed)
    n, days = spec.n_consumers, spec.n_days

    if spec.noise_cv > 0:
        log_sd = float(np.sqrt(np.log1p(spec.noise_cv**2)))
        multipliers = rng.lognormal(mean=-0.5 * log_sd**2, sigma=log_sd, size=(n, days))
    else:
        multipliers = np.ones((n, days))
    amplitude = np.maximum(1.0 + 0.15 * rng.standard_normal(days), 0.2)
    rt_noise = rng.normal(0.0, 0.5, size=(days, HOURS))

    start = dt.date(2021, 1, 4)  # a Monday, so weekday shapes line up simply
    n_peaky = int(round(spec.fraction_peaky * n))
    shapes = {True: _archetype_shape(True), False: _archetype_shape(False)}

    consumers = []
    for i in range(n):
        peaky = i < n_peaky
        usage = spec.base_kwh_per_day * np.outer(multipliers[i], shapes[peaky])
        usage = np.round(usage, 4)
        label = "peak" if peaky else "night"
        consumers.append(ConsumerSeries(f"{label}-{i:05d}", HourlyMatrix(usage, start)))

    da = np.round(2.0 + 4.0 * np.outer(amplitude, _price_peak()), 4)
    rt = np.round(np.maximum(da + rt_noise, 0.0), 4)
    prices = PriceSeries(HourlyMatrix(da, start), HourlyMatrix(rt, start))

    train = int(split * days + 0.5)
    return Dataset(tuple(consumers), prices, train_days=train, validate_days=days - train)


def align(consumers: list[ConsumerSeries], prices: PriceSeries, split: float) -> Dataset:
    """Truncate all series to the common date range and split chronologically.

    ``train_days`` is round(split * total); the leading days form the
    training window (no shuffling).
    """
    if not consumers:
        raise ValueError("no consumers to align")
    if not (0.0 < split <= 1.0):
        raise ValueError("split must be in (0, 1]")
    start = max([c.usage.start_date for c in consumers] + [prices.start_date])
    end = min([c.usage.end_date for c in consumers] + [prices.day_ahead.end_date])
    if start > end:
        raise ValueError("no overlapping dates between consumers and prices")
    total = (end - start).days + 1

    def cut(matrix: HourlyMatrix) -> HourlyMatrix:
        first = matrix.row_of_date(start)
        return matrix.slice_days(first, first + total)

    cut_consumers = tuple(ConsumerSeries(c.consumer_id, cut(c.usage)) for c in consumers)
    cut_prices = PriceSeries(cut(prices.day_ahead), cut(prices.real_time))
    train = int(split * total + 0.5)
    return Dataset(cut_consumers, cut_prices, train_days=train, validate_days=total - train)
