"""Minimum-rate subset selection by bisection with a greedy feasibility test.

The problem: among all groups of exactly M consumers, find the one whose
per-unit cost (u.t)/(u.w) is smallest. For a candidate rate lam, some M-group
achieves a rate <= lam iff the M smallest entries of t - lam*w sum to a
nonpositive value, so feasibility is a sort, and the set of feasible rates is
an upward-closed interval. Bisecting the bracket [min t_i/w_i, max t_i/w_i]
therefore converges to the optimum; the last feasible test provides both the
rate and a certificate selection.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .types import CostStats, SelectionVector

DEFAULT_GAMMA = 1e-6  # cents/kWh; well below any reporting granularity

BRUTE_FORCE_LIMIT = 1_000_000


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a minimum-rate solve.

    lambda_star carries the certificate property (t - lambda_star*w) . u <= 0,
    and bracket is the final bisection interval (upper - lower <= gamma).
    """

    lambda_star: float
    selection: SelectionVector
    iterations: int
    bracket: tuple[float, float]


def feasibility_test(stats: CostStats, lam: float, m: int) -> Optional[SelectionVector]:
    """Greedy test: can some M-group achieve rate <= lam?

    Ranks t - lam*w ascending (ties broken by lower index) and selects the M
    smallest. Returns that selection when its ranked sum is nonpositive,
    otherwise None.
    """
    _check_m(stats, m)
    if not math.isfinite(lam):
        raise ValueError("lam must be finite")
    v = stats.t - lam * stats.w
    order = np.argsort(v, kind="stable")
    chosen = order[:m]
    if float(v[chosen].sum()) <= 0.0:
        return SelectionVector.from_indices(stats.n, chosen)
    return None


def solve_min_lambda(stats: CostStats, m: int, gamma: float = DEFAULT_GAMMA) -> SolveResult:
    """Bisection solve for the cheapest-to-serve group of size M.

    Brackets between the minimum and maximum individual rate and halves until
    the bracket is within gamma, returning the last feasible rate with its
    certificate selection. Iteration count is at most
    ceil(log2(bracket / gamma)) + 1.
    """
    _check_m(stats, m)
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    ratios = stats.ratios
    lo = float(ratios.min())
    hi = float(ratios.max())
    if hi - lo <= gamma:
        # All individual rates coincide within tolerance: any M consumers do.
        selection = SelectionVector.from_indices(stats.n, range(m))
        return SolveResult(lambda_star=lo, selection=selection, iterations=0, bracket=(lo, hi))

    best = feasibility_test(stats, hi, m)
    assert best is not None  # the max ratio is always feasible
    best_lam = hi
    iterations = 0
    while hi - lo > gamma:
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            break  # float resolution exhausted
        candidate = feasibility_test(stats, mid, m)
        if candidate is None:
            lo = mid
        else:
            hi = mid
            best, best_lam = candidate, mid
        iterations += 1
    return SolveResult(lambda_star=best_lam, selection=best, iterations=iterations, bracket=(lo, hi))


def brute_force_min_lambda(
    stats: CostStats, m: int, max_subsets: int = BRUTE_FORCE_LIMIT
) -> SolveResult:
    """Exact minimizer by enumerating every M-subset; oracle for the bisection.

    Guarded: refuses instances with more than max_subsets combinations.
    """
    _check_m(stats, m)
    count = math.comb(stats.n, m)
    if count > max_subsets:
        raise ValueError(f"C({stats.n}, {m}) = {count} subsets exceeds the limit of {max_subsets}")
    t = stats.t.tolist()
    w = stats.w.tolist()
    best_ratio = math.inf
    best_subset: tuple[int, ...] = ()
    for subset in itertools.combinations(range(stats.n), m):
        num = sum(t[i] for i in subset)
        den = sum(w[i] for i in subset)
        ratio = num / den
        if ratio < best_ratio:
            best_ratio = ratio
            best_subset = subset
    selection = SelectionVector.from_indices(stats.n, best_subset)
    return SolveResult(
        lambda_star=best_ratio,
        selection=selection,
        iterations=count,
        bracket=(best_ratio, best_ratio),
    )


def lambda_curve(
    stats: CostStats, sizes: Sequence[int], gamma: float = DEFAULT_GAMMA
) -> list[tuple[int, float]]:
    """Minimum achievable rate per group size; nondecreasing in M up to slack.

    Per-consumer stats are shared across sizes, so each point costs one
    bisection solve.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be sorted ascending")
    return [(m, solve_min_lambda(stats, m, gamma).lambda_star) for m in sizes]


def _check_m(stats: CostStats, m: int):
    if not (1 <= m <= stats.n):
        raise ValueError(f"group size must be in [1, {stats.n}], got {m}")
