"""Replay of the validate window under realized prices.

Each held-out day is forecast from the history so far, covered with the
quantile-optimal day-ahead purchase, and settled at that day's realized
prices. The report compares the realized per-unit cost against the group's
per-unit cost over the same window; the gap between them is the price paid
for forecast uncertainty, and the closed-form expectation of that gap is
included for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .costs import (
    DailySettlement,
    RHO_MIN,
    SettlementDesign,
    expected_penalty,
    mean_real_time_price,
    newsvendor_purchase,
    realized_cost,
    realized_rate,
)
from .forecast import DEFAULT_AR_ORDER, _fit_from_profile, _group_profile, estimate_error_sigma, predict_day
from .types import Dataset, SelectionVector


@dataclass(frozen=True)
class ReplayReport:
    design: SettlementDesign
    settlements: tuple[DailySettlement, ...]
    demand_kwh: float
    cost_cents: float
    realized_rate: float  # cents/kWh over the replayed days
    lambda_rate: float  # per-unit cost at day-ahead prices over the same days
    penalty_gap: float  # realized_rate - lambda_rate
    expected_gap: float  # closed-form expected penalty per kWh

    @property
    def n_days(self) -> int:
        return len(self.settlements)


def replay_validate(
    dataset: Dataset,
    selection: Optional[SelectionVector] = None,
    design: SettlementDesign = "two_sided",
    n_days: Optional[int] = None,
    order: int = DEFAULT_AR_ORDER,
    rho_min: float = RHO_MIN,
) -> ReplayReport:
    """Forecast, purchase and settle each validate day for the selected group.

    The error model feeding the purchase rule is estimated from one-step
    residuals inside the training window; the expected real-time price is the
    training window's per-hour mean. History fed to the forecaster uses
    actual totals (day-ahead operation always knows yesterday's meter data).
    """
    if selection is None:
        selection = SelectionVector(
            bits=np.ones(dataset.n_consumers, dtype=bool), cardinality=dataset.n_consumers
        )
    if dataset.validate_days < 1:
        raise ValueError("validate window is empty")
    total_days = dataset.validate_days if n_days is None else int(n_days)
    if not (1 <= total_days <= dataset.validate_days):
        raise ValueError(f"n_days must be in [1, {dataset.validate_days}]")

    profile = _group_profile(dataset, selection)
    model = _fit_from_profile(profile, dataset.train_days, dataset.start_weekday, order)
    error_model = estimate_error_sigma(dataset, selection, model=model, window="train")
    q_mean = mean_real_time_price(dataset, "train")
    totals = profile.sum(axis=1)

    p_all = dataset.prices.day_ahead.values
    q_all = dataset.prices.real_time.values

    settlements: list[DailySettlement] = []
    day_costs = np.empty(total_days)
    day_demand = np.empty(total_days)
    da_value = 0.0  # sum of p . d over replayed days
    expected_total = 0.0
    for step in range(total_days):
        k = dataset.train_days + step
        forecast = predict_day(model, totals[:k], dataset.weekday_of_row(k))
        plan = newsvendor_purchase(forecast, error_model, p_all[k], q_mean, rho_min=rho_min)
        cost = realized_cost(p_all[k], q_all[k], plan.purchase, profile[k], design)
        settlements.append(
            DailySettlement(day_index=k, purchased=plan.purchase, consumed=profile[k], cost=cost)
        )
        day_costs[step] = cost
        day_demand[step] = totals[k]
        da_value += float(p_all[k] @ profile[k])
        expected_total += expected_penalty(error_model, p_all[k], q_mean, rho_min=rho_min)

    rate = realized_rate(day_costs, day_demand)
    demand = float(day_demand.sum())
    lam = da_value / demand
    return ReplayReport(
        design=design,
        settlements=tuple(settlements),
        demand_kwh=demand,
        cost_cents=float(day_costs.sum()),
        realized_rate=rate,
        lambda_rate=lam,
        penalty_gap=rate - lam,
        expected_gap=expected_total / demand,
    )
