"""Iterative segmentation of a population into rate groups.

Each round builds the forecast-error curve for minimum-rate groups over the
remaining consumers, picks the smallest size whose CV meets the threshold,
recruits that group at its historical rate, removes it, and repeats. The
leftover consumers, if no size qualifies, are either aggregated into one
final group or dropped. A stability audit verifies that no consumer could
improve their rate by unilaterally joining an earlier group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .costs import consumer_stats, group_lambda
from .forecast import DEFAULT_AR_ORDER, CvCurve, backtest_cv
from .solver import DEFAULT_GAMMA, solve_min_lambda
from .types import CostStats, Dataset, SelectionVector

LeftoverPolicy = str  # "aggregate" or "drop"


@dataclass(frozen=True)
class SegmentGroup:
    """One recruited rate group, indexed over the original population."""

    round: int
    members: SelectionVector
    size: int
    rate: float  # cents/kWh, historical per-unit cost of the group
    cv: float  # percent, backtested forecast error
    threshold_met: bool

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("round numbering starts at 1")
        if self.size < 1:
            raise ValueError("group size must be >= 1")
        if self.members.cardinality != self.size:
            raise ValueError("members cardinality does not match size")
        if self.rate <= 0:
            raise ValueError("group rate must be positive")
        if self.cv < 0:
            raise ValueError("cv must be nonnegative")


@dataclass(frozen=True)
class SegmentationResult:
    """Ordered rate groups plus the policy that produced them.

    Groups are always pairwise disjoint; under the aggregate policy they also
    cover the entire population.
    """

    groups: tuple[SegmentGroup, ...]
    cv_threshold: float
    leftover_policy: LeftoverPolicy

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.leftover_policy not in ("aggregate", "drop"):
            raise ValueError(f"unknown leftover policy {self.leftover_policy!r}")
        if self.cv_threshold <= 0:
            raise ValueError("cv_threshold must be positive")
        if not self.groups:
            return
        n = self.groups[0].members.n
        seen = np.zeros(n, dtype=bool)
        for g in self.groups:
            if g.members.n != n:
                raise ValueError("all groups must index the same population")
            if np.any(seen & g.members.bits):
                raise ValueError(f"group {g.round} overlaps an earlier group")
            seen |= g.members.bits
        if self.leftover_policy == "aggregate" and not np.all(seen):
            raise ValueError("aggregate policy requires the groups to cover the population")

    @property
    def n_assigned(self) -> int:
        return sum(g.size for g in self.groups)

    def threshold_met_groups(self) -> list[SegmentGroup]:
        return [g for g in self.groups if g.threshold_met]


@dataclass(frozen=True)
class StabilityViolation:
    kind: str  # "rate_order" or "join_improves"
    earlier_round: int
    later_round: int
    consumer_index: Optional[int]
    magnitude: float  # cents/kWh beyond the tolerance band


@dataclass(frozen=True)
class StabilityReport:
    pairs_checked: int
    moves_checked: int
    violations: tuple[StabilityViolation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def min_group_size(curve: CvCurve, cv_threshold: float) -> Optional[int]:
    """Smallest evaluated size whose optimal-group CV meets the threshold."""
    qualifying = [p.m for p in curve.optimal_points() if p.cv <= cv_threshold]
    return min(qualifying) if qualifying else None


def default_size_grid(n: int, points: int = 20, smallest: int = 10) -> list[int]:
    """Log-spaced candidate sizes from `smallest` up to n."""
    if n < 1:
        raise ValueError("population must be nonempty")
    if n <= smallest:
        return list(range(1, n + 1))
    grid = np.logspace(np.log10(smallest), np.log10(n), points)
    return sorted({int(round(g)) for g in grid})


def _optimal_group_cv(
    dataset: Dataset,
    stats: CostStats,
    remaining: np.ndarray,
    m: int,
    gamma: float,
    order: int,
) -> tuple[float, SelectionVector]:
    """Solve for the cheapest size-m group among remaining consumers, backtest it."""
    pool = np.flatnonzero(remaining)
    sub = CostStats(t=stats.t[pool], w=stats.w[pool])
    local = solve_min_lambda(sub, m, gamma).selection
    selection = SelectionVector.from_indices(dataset.n_consumers, pool[local.indices])
    return backtest_cv(dataset, selection, order=order), selection


def segment_population(
    dataset: Dataset,
    cv_threshold: float,
    size_grid: Optional[Sequence[int]] = None,
    gamma: float = DEFAULT_GAMMA,
    leftover_policy: LeftoverPolicy = "aggregate",
    order: int = DEFAULT_AR_ORDER,
    refine: bool = True,
) -> SegmentationResult:
    """Peel minimum-rate groups meeting the CV threshold until none remain.

    Every round re-evaluates the forecast-error curve from scratch on the
    remaining consumers over `size_grid` (capped at the remaining count). The
    coarse scan stops at the first qualifying size; with refine=True a linear
    scan then walks the bracket between the last failing grid size and that
    point to find the smallest qualifying size. CV is measured by backtest:
    fit on the training window, evaluate on the validate window. Rates are
    the groups' historical per-unit costs over the training window.
    """
    if cv_threshold <= 0:
        raise ValueError("cv_threshold must be positive")
    if size_grid is None:
        size_grid = default_size_grid(dataset.n_consumers)
    size_grid = sorted(set(int(m) for m in size_grid))
    if not size_grid:
        raise ValueError("size grid must be nonempty")
    if size_grid[0] < 1:
        raise ValueError("size grid entries must be >= 1")

    stats = consumer_stats(dataset, "train")
    remaining = np.ones(dataset.n_consumers, dtype=bool)
    groups: list[SegmentGroup] = []
    round_no = 1
    while remaining.any():
        n_rem = int(remaining.sum())
        sizes = sorted({min(m, n_rem) for m in size_grid})

        found_m = None
        found_sel = None
        found_cv = None
        prev_fail = None
        for m in sizes:
            cv_m, sel = _optimal_group_cv(dataset, stats, remaining, m, gamma, order)
            if cv_m <= cv_threshold:
                found_m, found_sel, found_cv = m, sel, cv_m
                break
            prev_fail = m

        if found_m is not None and refine and prev_fail is not None:
            for m in range(prev_fail + 1, found_m):
                cv_m, sel = _optimal_group_cv(dataset, stats, remaining, m, gamma, order)
                if cv_m <= cv_threshold:
                    found_m, found_sel, found_cv = m, sel, cv_m
                    break

        if found_m is None:
            break

        groups.append(
            SegmentGroup(
                round=round_no,
                members=found_sel,
                size=found_m,
                rate=group_lambda(stats, found_sel),
                cv=found_cv,
                threshold_met=True,
            )
        )
        remaining &= ~found_sel.bits
        round_no += 1

    if remaining.any() and leftover_policy == "aggregate":
        leftover = SelectionVector(bits=remaining, cardinality=int(remaining.sum()))
        groups.append(
            SegmentGroup(
                round=round_no,
                members=leftover,
                size=leftover.cardinality,
                rate=group_lambda(stats, leftover),
                cv=backtest_cv(dataset, leftover, order=order),
                threshold_met=False,
            )
        )

    return SegmentationResult(
        groups=tuple(groups), cv_threshold=cv_threshold, leftover_policy=leftover_policy
    )


def stability_audit(
    result: SegmentationResult, stats: CostStats, gamma: float = DEFAULT_GAMMA
) -> StabilityReport:
    """Check that the segmentation leaves no profitable unilateral move.

    For every consecutive pair of threshold-met groups (i, i+1):
    (a) the earlier rate is no higher than the later rate, within 2*gamma;
    (b) no member of group i+1 would lower group i's rate by joining it,
        within 2*gamma.
    Report-only: violations are returned with magnitudes, never raised.
    """
    met = sorted(result.threshold_met_groups(), key=lambda g: g.round)
    violations: list[StabilityViolation] = []
    pairs = 0
    moves = 0
    tol = 2.0 * gamma
    for earlier, later in zip(met, met[1:]):
        pairs += 1
        if earlier.rate > later.rate + tol:
            violations.append(
                StabilityViolation(
                    kind="rate_order",
                    earlier_round=earlier.round,
                    later_round=later.round,
                    consumer_index=None,
                    magnitude=earlier.rate - later.rate - tol,
                )
            )
        bits = earlier.members.bits
        t_sum = float(stats.t[bits].sum())
        w_sum = float(stats.w[bits].sum())
        for j in later.members.indices:
            moves += 1
            joined = (t_sum + float(stats.t[j])) / (w_sum + float(stats.w[j]))
            if joined < earlier.rate - tol:
                violations.append(
                    StabilityViolation(
                        kind="join_improves",
                        earlier_round=earlier.round,
                        later_round=later.round,
                        consumer_index=int(j),
                        magnitude=earlier.rate - tol - joined,
                    )
                )
    return StabilityReport(pairs_checked=pairs, moves_checked=moves, violations=tuple(violations))
