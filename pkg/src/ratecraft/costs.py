"""Market cost model: cost-to-serve rates, settlement, and optimal purchasing.

An hourly day-ahead purchase is settled against actual consumption either
two-sided (surplus sold back at the real-time price) or one-sided (surplus
forfeited, shortfall bought at the real-time price). Under the one-sided
design the cost-minimizing purchase adjustment is a per-hour quantile of the
forecast-error distribution, the classic critical-fractile rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .types import HOURS, CostStats, Dataset, ForecastErrorModel, SelectionVector, WindowName

SettlementDesign = Literal["two_sided", "one_sided"]

# Keeps the quantile finite when p/q leaves (0, 1); documented degradation.
RHO_MIN = 1e-6

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PurchasePlan:
    """Day-ahead purchase: forecast plus a (possibly negative) adjustment."""

    forecast: np.ndarray
    adjustment: np.ndarray
    purchase: np.ndarray

    def __post_init__(self):
        for name in ("forecast", "adjustment", "purchase"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.purchase < 0):
            raise ValueError("purchase quantities must be nonnegative")


@dataclass(frozen=True)
class DailySettlement:
    """One settled day: what was bought, what was used, what it cost."""

    day_index: int
    purchased: np.ndarray  # kWh per hour
    consumed: np.ndarray  # kWh per hour
    cost: float  # cents

    def __post_init__(self):
        for name in ("purchased", "consumed"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def consumer_stats(dataset: Dataset, window: WindowName = "train") -> CostStats:
    """Per-consumer price-weighted usage t_i (cents) and total usage w_i (kWh).

    t_i sums day-ahead price times consumption over every hour of the window;
    w_i is the consumer's total kWh over the same window.
    """
    sl = dataset.window_slice(window)
    if sl.stop - sl.start == 0:
        raise ValueError(f"{window} window is empty")
    prices = dataset.prices.day_ahead.values[sl].ravel()
    flat = dataset.usage_stack[:, sl, :].reshape(dataset.n_consumers, -1)
    t = flat @ prices
    w = flat.sum(axis=1)
    return CostStats(t=t, w=w)


def individual_lambda(stats: CostStats, i: int) -> float:
    """Historical per-unit cost of serving consumer i, in cents/kWh."""
    if not (0 <= i < stats.n):
        raise ValueError(f"consumer index {i} out of range for {stats.n} consumers")
    return float(stats.t[i] / stats.w[i])


def group_lambda(stats: CostStats, u: SelectionVector) -> float:
    """Per-unit cost of serving the selected group: (u.t) / (u.w).

    Equals the kWh-weighted mean of the members' individual rates, so it
    always lies between their minimum and maximum.
    """
    if u.n != stats.n:
        raise ValueError("selection length does not match stats")
    bits = u.bits
    return float(stats.t[bits].sum() / stats.w[bits].sum())


def realized_cost(
    p: Sequence[float],
    q: Sequence[float],
    purchased: Sequence[float],
    consumed: Sequence[float],
    design: SettlementDesign = "two_sided",
) -> float:
    """Settle one day: day-ahead purchase at p, deviation at realized q.

    two_sided:  p.purchased + q.(consumed - purchased)
    one_sided:  p.purchased + q.max(consumed - purchased, 0)
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    tilde = np.asarray(purchased, dtype=np.float64)
    d = np.asarray(consumed, dtype=np.float64)
    if not (p.shape == q.shape == tilde.shape == d.shape):
        raise ValueError("price and quantity vectors must have equal shapes")
    gap = d - tilde
    if design == "two_sided":
        return float(p @ tilde + q @ gap)
    if design == "one_sided":
        return float(p @ tilde + q @ np.maximum(gap, 0.0))
    raise ValueError(f"unknown settlement design {design!r}")


def realized_rate(costs: Sequence[float], demands: Sequence[float]) -> float:
    """Average per-unit cost over a run of days: sum(costs) / sum(kWh)."""
    costs = np.asarray(costs, dtype=np.float64)
    demands = np.asarray(demands, dtype=np.float64)
    if costs.shape != demands.shape:
        raise ValueError("costs and demands must have equal length")
    total = float(demands.sum())
    if total <= 0:
        raise ValueError("zero total demand")
    return float(costs.sum() / total)


def _optimal_adjustment(
    sigma: np.ndarray, p: np.ndarray, q_mean: np.ndarray, rho_min: float
) -> np.ndarray:
    rho = np.clip(p / q_mean, rho_min, 1.0 - rho_min)
    return sigma * ndtri(1.0 - rho)


def _validate_price_inputs(p, q_mean):
    p = np.asarray(p, dtype=np.float64)
    q_mean = np.asarray(q_mean, dtype=np.float64)
    if p.shape != (HOURS,) or q_mean.shape != (HOURS,):
        raise ValueError(f"prices must be {HOURS}-vectors")
    if np.any(p < 0):
        raise ValueError("day-ahead prices must be nonnegative")
    if np.any(q_mean <= 0):
        raise ValueError("expected real-time price must be positive in every hour")
    return p, q_mean


def newsvendor_purchase(
    forecast: Sequence[float],
    error_model: ForecastErrorModel,
    p: Sequence[float],
    q_mean: Sequence[float],
    rho_min: float = RHO_MIN,
) -> PurchasePlan:
    """Cost-minimizing one-sided purchase given Gaussian hourly forecast errors.

    At the optimum the probability of under-purchasing in hour h equals
    p_h / E[q_h], so the adjustment is delta_h = sigma_h * z(1 - rho_h) with
    rho_h clamped to [rho_min, 1 - rho_min] to keep the quantile finite when
    p_h exceeds the expected real-time price. Purchases are floored at zero;
    with sigma_h = 0 the purchase is exactly the forecast.
    """
    p, q_mean = _validate_price_inputs(p, q_mean)
    forecast = np.asarray(forecast, dtype=np.float64)
    if forecast.shape != (HOURS,):
        raise ValueError(f"forecast must be a {HOURS}-vector")
    delta = _optimal_adjustment(error_model.sigma, p, q_mean, rho_min)
    purchase = np.maximum(forecast + delta, 0.0)
    return PurchasePlan(forecast=forecast, adjustment=delta, purchase=purchase)


def expected_penalty(
    error_model: ForecastErrorModel,
    p: Sequence[float],
    q_mean: Sequence[float],
    rho_min: float = RHO_MIN,
) -> float:
    """Expected extra cost (cents) of one-sided settlement at the optimal purchase.

    Per hour: p_h * delta_h plus E[q_h] times the expected uncovered shortfall
    E[(-eps_h - delta_h)+]. For X ~ N(0, sigma^2) the closed form is
    E[(X - a)+] = sigma * phi(a / sigma) - a * (1 - Phi(a / sigma)).
    Zero when sigma is zero everywhere.
    """
    p, q_mean = _validate_price_inputs(p, q_mean)
    sigma = error_model.sigma
    delta = _optimal_adjustment(sigma, p, q_mean, rho_min)
    tail = np.zeros(HOURS)
    pos = sigma > 0
    if np.any(pos):
        z = delta[pos] / sigma[pos]
        phi = np.exp(-0.5 * z * z) / _SQRT_2PI
        tail[pos] = sigma[pos] * phi - delta[pos] * (1.0 - ndtr(z))
    return float(np.sum(p * delta + q_mean * tail))


def mean_real_time_price(dataset: Dataset, window: WindowName = "train") -> np.ndarray:
    """Per-hour mean of real-time prices over the window, the E[q] estimate."""
    sl = dataset.window_slice(window)
    if sl.stop - sl.start == 0:
        raise ValueError(f"{window} window is empty")
    return dataset.prices.real_time.values[sl].mean(axis=0)
