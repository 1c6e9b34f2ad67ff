"""Core domain types shared across the toolkit.

Conventions: energy is kWh, prices are cents/kWh, and every time series is a
(days x 24) matrix over consecutive calendar days. Instances are immutable
after construction (arrays are marked read-only) and therefore safe to share
across threads. Constructors validate their invariants and raise ValueError
instead of silently repairing bad input.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Literal

import numpy as np

HOURS = 24

WindowName = Literal["train", "validate", "all"]


def _readonly_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HourlyMatrix:
    """Nonnegative hourly values, one row per consecutive day."""

    values: np.ndarray
    start_date: dt.date

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != HOURS:
            raise ValueError(f"expected a (days, {HOURS}) matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("need at least one day of data")
        if not np.all(np.isfinite(arr)):
            raise ValueError("values must be finite")
        if np.any(arr < 0):
            raise ValueError("values must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def end_date(self) -> dt.date:
        """Last covered date (inclusive)."""
        return self.start_date + dt.timedelta(days=self.n_days - 1)

    def date_of_row(self, row: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(row))

    def row_of_date(self, date: dt.date) -> int:
        return (date - self.start_date).days

    def slice_days(self, start: int, stop: int) -> "HourlyMatrix":
        if not (0 <= start < stop <= self.n_days):
            raise ValueError(f"invalid day slice [{start}, {stop}) for {self.n_days} days")
        return HourlyMatrix(self.values[start:stop], self.date_of_row(start))


@dataclass(frozen=True)
class ConsumerSeries:
    """One consumer's hourly kWh usage over a date range."""

    consumer_id: str
    usage: HourlyMatrix

    def __post_init__(self):
        if not self.consumer_id:
            raise ValueError("consumer_id must be nonempty")
        if float(self.usage.values.sum()) <= 0.0:
            raise ValueError(f"consumer {self.consumer_id} has zero total usage")

    @property
    def total_kwh(self) -> float:
        return float(self.usage.values.sum())


@dataclass(frozen=True)
class PriceSeries:
    """Aligned day-ahead and real-time hourly prices in cents/kWh."""

    day_ahead: HourlyMatrix
    real_time: HourlyMatrix

    def __post_init__(self):
        if self.day_ahead.values.shape != self.real_time.values.shape:
            raise ValueError("day-ahead and real-time matrices must have the same shape")
        if self.day_ahead.start_date != self.real_time.start_date:
            raise ValueError("day-ahead and real-time series must start on the same date")

    @property
    def n_days(self) -> int:
        return self.day_ahead.n_days

    @property
    def start_date(self) -> dt.date:
        return self.day_ahead.start_date


@dataclass(frozen=True)
class Dataset:
    """Consumers and prices over one common date range, split chronologically.

    The first ``train_days`` rows form the historical window used for fitting
    and recruitment; the remaining ``validate_days`` rows are held out for
    backtesting.
    """

    consumers: tuple[ConsumerSeries, ...]
    prices: PriceSeries
    train_days: int
    validate_days: int

    def __post_init__(self):
        object.__setattr__(self, "consumers", tuple(self.consumers))
        if len(self.consumers) == 0:
            raise ValueError("dataset needs at least one consumer")
        shape = self.prices.day_ahead.values.shape
        start = self.prices.start_date
        for c in self.consumers:
            if c.usage.values.shape != shape:
                raise ValueError(
                    f"consumer {c.consumer_id} shape {c.usage.values.shape} "
                    f"does not match prices shape {shape}"
                )
            if c.usage.start_date != start:
                raise ValueError(
                    f"consumer {c.consumer_id} starts {c.usage.start_date}, prices start {start}"
                )
        ids = [c.consumer_id for c in self.consumers]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate consumer ids in dataset")
        if self.train_days < 1:
            raise ValueError("train window must contain at least one day")
        if self.validate_days < 0:
            raise ValueError("validate_days must be nonnegative")
        if self.train_days + self.validate_days != self.prices.n_days:
            raise ValueError(
                f"train_days + validate_days must equal {self.prices.n_days} total days"
            )

    @property
    def n_consumers(self) -> int:
        return len(self.consumers)

    @property
    def n_days(self) -> int:
        return self.prices.n_days

    @property
    def start_date(self) -> dt.date:
        return self.prices.start_date

    @property
    def start_weekday(self) -> int:
        """Weekday of the first row, Monday = 0."""
        return self.start_date.weekday()

    @property
    def consumer_ids(self) -> tuple[str, ...]:
        return tuple(c.consumer_id for c in self.consumers)

    @cached_property
    def usage_stack(self) -> np.ndarray:
        """All usage as one read-only (n_consumers, n_days, 24) array."""
        stack = np.stack([c.usage.values for c in self.consumers])
        stack.setflags(write=False)
        return stack

    def window_slice(self, window: WindowName) -> slice:
        if window == "train":
            return slice(0, self.train_days)
        if window == "validate":
            return slice(self.train_days, self.n_days)
        if window == "all":
            return slice(0, self.n_days)
        raise ValueError(f"unknown window {window!r}; expected train, validate or all")

    def weekday_of_row(self, row: int) -> int:
        return (self.start_weekday + int(row)) % 7

    def date_of_row(self, row: int) -> dt.date:
        return self.prices.day_ahead.date_of_row(row)


@dataclass(frozen=True)
class SelectionVector:
    """Binary membership vector over a consumer population."""

    bits: np.ndarray
    cardinality: int

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 1:
            raise ValueError("bits must be a 1-D vector")
        n_set = int(bits.sum())
        if n_set != self.cardinality:
            raise ValueError(f"{n_set} bits set but cardinality says {self.cardinality}")
        if not (1 <= self.cardinality <= bits.size):
            raise ValueError(f"cardinality must be in [1, {bits.size}], got {self.cardinality}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "SelectionVector":
        idx = np.asarray(list(indices), dtype=np.intp)
        if idx.size != np.unique(idx).size:
            raise ValueError("selection indices must be unique")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError(f"selection indices out of range for population of {n}")
        bits = np.zeros(n, dtype=bool)
        bits[idx] = True
        return cls(bits=bits, cardinality=int(idx.size))

    @property
    def n(self) -> int:
        return int(self.bits.size)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)


@dataclass(frozen=True)
class CostStats:
    """Per-consumer price-weighted usage t (cents) and total usage w (kWh)."""

    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        t = _readonly_array(self.t)
        w = _readonly_array(self.w)
        if t.ndim != 1 or w.ndim != 1 or t.size != w.size:
            raise ValueError("t and w must be 1-D vectors of equal length")
        if t.size < 1:
            raise ValueError("need stats for at least one consumer")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValueError("t and w must be finite")
        if np.any(w <= 0):
            raise ValueError("every consumer must have positive total usage w")
        if np.any(t < 0):
            raise ValueError("price-weighted usage t must be nonnegative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def ratios(self) -> np.ndarray:
        """Per-consumer rate t_i / w_i in cents/kWh."""
        return self.t / self.w


@dataclass(frozen=True)
class ForecastErrorModel:
    """Zero-mean Gaussian hourly forecast error, one standard deviation per hour."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = _readonly_array(self.sigma)
        if sigma.shape != (HOURS,):
            raise ValueError(f"sigma must have shape ({HOURS},), got {sigma.shape}")
        if not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be finite")
        if np.any(sigma < 0):
            raise ValueError("sigma must be nonnegative in every hour")
        object.__setattr__(self, "sigma", sigma)
