"""Day-ahead group forecasting and forecast-error evaluation.

The forecaster is deliberately simple: an autoregressive model over the
group's daily totals plus a per-weekday mean normalized load shape. The
predicted day is the predicted total times the shape, so the hourly forecast
sums exactly to the total prediction. It sits behind a small surface
(fit / predict_day) so a richer model can be swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .costs import consumer_stats
from .solver import DEFAULT_GAMMA, solve_min_lambda
from .types import HOURS, Dataset, ForecastErrorModel, SelectionVector

DEFAULT_AR_ORDER = 7  # one week of lags
MIN_TRAIN_DAYS = 14  # every weekday seen at least twice

_SHAPE_TOL = 1e-12


@dataclass(frozen=True)
class GroupForecaster:
    """AR coefficients over daily totals plus per-weekday normalized shapes."""

    order: int
    intercept: float
    coeffs: np.ndarray  # (order,), coeffs[j] multiplies the total j+1 days back
    shapes: np.ndarray  # (7, 24) rows normalized to sum 1

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.order,):
            raise ValueError(f"expected {self.order} AR coefficients, got {coeffs.shape}")
        shapes = np.asarray(self.shapes, dtype=np.float64)
        if shapes.shape != (7, HOURS):
            raise ValueError(f"shapes must be (7, {HOURS}), got {shapes.shape}")
        if np.any(shapes < 0):
            raise ValueError("load shapes must be nonnegative")
        if np.any(np.abs(shapes.sum(axis=1) - 1.0) > _SHAPE_TOL):
            raise ValueError("every load shape must sum to 1")
        coeffs.setflags(write=False)
        shapes.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "shapes", shapes)


@dataclass(frozen=True)
class CvPoint:
    m: int
    kind: str  # "random" or "optimal"
    cv: float

    def __post_init__(self):
        if self.kind not in ("random", "optimal"):
            raise ValueError(f"unknown point kind {self.kind!r}")
        if self.cv < 0:
            raise ValueError("cv must be nonnegative")


@dataclass(frozen=True)
class CvCurve:
    """Forecast error versus group size, for random and optimal groups."""

    points: tuple[CvPoint, ...]
    random_ci: dict[int, tuple[float, float]]

    def optimal_points(self) -> list[CvPoint]:
        return [p for p in self.points if p.kind == "optimal"]

    def random_points(self) -> list[CvPoint]:
        return [p for p in self.points if p.kind == "random"]


def fit_ar(series: Sequence[float], order: int) -> tuple[float, np.ndarray]:
    """Least-squares AR(order) fit with intercept on a 1-D series."""
    if order < 1:
        raise ValueError("AR order must be >= 1")
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("series must be 1-D")
    n = y.size
    if n < order + 1:
        raise ValueError(f"need at least {order + 1} points to fit AR({order})")
    rows = n - order
    design = np.empty((rows, order + 1))
    design[:, 0] = 1.0
    for j in range(1, order + 1):
        design[:, j] = y[order - j : n - j]
    coef, *_ = np.linalg.lstsq(design, y[order:], rcond=None)
    return float(coef[0]), coef[1:].copy()


def _group_profile(dataset: Dataset, u: SelectionVector) -> np.ndarray:
    """Summed hourly consumption of the group, as a (days, 24) matrix."""
    if u.n != dataset.n_consumers:
        raise ValueError("selection length does not match dataset")
    flat = dataset.usage_stack.reshape(dataset.n_consumers, -1)
    return (u.bits.astype(np.float64) @ flat).reshape(dataset.n_days, HOURS)


def _fit_from_profile(
    profile: np.ndarray, train_days: int, start_weekday: int, order: int
) -> GroupForecaster:
    if train_days < MIN_TRAIN_DAYS:
        raise ValueError(f"training window too short: need at least {MIN_TRAIN_DAYS} days")
    train = profile[:train_days]
    totals = train.sum(axis=1)
    active = totals > 0
    if not np.any(active):
        raise ValueError("group has no usage in the training window")
    intercept, coeffs = fit_ar(totals, order)

    normalized = train[active] / totals[active, None]
    overall = normalized.mean(axis=0)
    overall = overall / overall.sum()
    weekdays = (start_weekday + np.arange(train_days)) % 7
    shapes = np.empty((7, HOURS))
    for dow in range(7):
        rows = active & (weekdays == dow)
        if np.any(rows):
            s = (train[rows] / totals[rows, None]).mean(axis=0)
            shapes[dow] = s / s.sum()
        else:
            shapes[dow] = overall
    return GroupForecaster(order=order, intercept=intercept, coeffs=coeffs, shapes=shapes)


def fit(dataset: Dataset, u: SelectionVector, order: int = DEFAULT_AR_ORDER) -> GroupForecaster:
    """Fit the group forecaster on the training window."""
    profile = _group_profile(dataset, u)
    return _fit_from_profile(profile, dataset.train_days, dataset.start_weekday, order)


def predict_day(
    model: GroupForecaster, history: Sequence[float], day_of_week: int
) -> np.ndarray:
    """Forecast the next day's 24 hours from the daily-total history.

    The predicted total (floored at 0) is spread over the weekday shape, so
    the hourly forecast sums back to the total exactly.
    """
    h = np.asarray(history, dtype=np.float64)
    if h.size < model.order:
        raise ValueError(f"need at least {model.order} days of history, got {h.size}")
    if not (0 <= day_of_week <= 6):
        raise ValueError("day_of_week must be in [0, 6]")
    lags = h[-1 : -model.order - 1 : -1]  # most recent first, matching coeffs
    total = model.intercept + float(model.coeffs @ lags)
    total = max(total, 0.0)
    return total * model.shapes[day_of_week]


def cv(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Coefficient of variation of forecast error, in percent.

    100 * RMSE(actual, predicted) / mean(actual).
    """
    a = np.asarray(actual, dtype=np.float64).ravel()
    f = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != f.shape:
        raise ValueError("actual and predicted must have equal length")
    if a.size == 0:
        raise ValueError("cannot evaluate cv on empty series")
    mean = float(a.mean())
    if mean <= 0:
        raise ValueError("mean actual consumption must be positive")
    rmse = float(np.sqrt(np.mean((a - f) ** 2)))
    return 100.0 * rmse / mean


def _walk_forward(
    profile: np.ndarray,
    model: GroupForecaster,
    train_days: int,
    start_weekday: int,
    n_days: Optional[int] = None,
) -> np.ndarray:
    """Predict held-out days one step ahead, feeding actual totals forward."""
    total_days = profile.shape[0]
    stop = total_days if n_days is None else min(train_days + n_days, total_days)
    totals = profile.sum(axis=1)
    preds = np.empty((stop - train_days, HOURS))
    for k in range(train_days, stop):
        dow = (start_weekday + k) % 7
        preds[k - train_days] = predict_day(model, totals[:k], dow)
    return preds


def backtest_cv(
    dataset: Dataset,
    u: SelectionVector,
    order: int = DEFAULT_AR_ORDER,
    model: Optional[GroupForecaster] = None,
) -> float:
    """Fit on the training window, evaluate CV over the whole validate window."""
    if dataset.validate_days < 1:
        raise ValueError("validate window is empty")
    profile = _group_profile(dataset, u)
    if model is None:
        model = _fit_from_profile(profile, dataset.train_days, dataset.start_weekday, order)
    preds = _walk_forward(profile, model, dataset.train_days, dataset.start_weekday)
    actual = profile[dataset.train_days :]
    return cv(actual.ravel(), preds.ravel())


def estimate_error_sigma(
    dataset: Dataset,
    u: SelectionVector,
    model: Optional[GroupForecaster] = None,
    window: str = "train",
    order: int = DEFAULT_AR_ORDER,
) -> ForecastErrorModel:
    """Per-hour standard deviation of forecast residuals.

    window="train" uses one-step-ahead predictions inside the training window
    (after the AR warm-up); window="validate" uses the held-out days.
    """
    profile = _group_profile(dataset, u)
    if model is None:
        model = _fit_from_profile(profile, dataset.train_days, dataset.start_weekday, order)
    totals = profile.sum(axis=1)
    if window == "train":
        rows = range(model.order, dataset.train_days)
    elif window == "validate":
        rows = range(dataset.train_days, dataset.n_days)
    else:
        raise ValueError(f"unknown residual window {window!r}")
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("need at least two residual days to estimate sigma")
    residuals = np.empty((len(rows), HOURS))
    for out, k in enumerate(rows):
        pred = predict_day(model, totals[:k], (dataset.start_weekday + k) % 7)
        residuals[out] = profile[k] - pred
    return ForecastErrorModel(sigma=residuals.std(axis=0, ddof=1))


def cv_curve(
    dataset: Dataset,
    sizes: Sequence[int],
    n_random_trials: int = 30,
    gamma: float = DEFAULT_GAMMA,
    seed: int = 0,
    order: int = DEFAULT_AR_ORDER,
) -> CvCurve:
    """Forecast-error curve over group sizes, for random and optimal groups.

    Per size M: the mean CV of n_random_trials uniformly random M-groups with
    a 95% band (mean +/- 1.96 sample standard deviations), plus the CV of the
    minimum-rate group of size M solved on the training window. Trial k at
    size index s draws from default_rng([seed, s, k]), so results are
    reproducible and independent of evaluation order.
    """
    if dataset.validate_days < 1:
        raise ValueError("validate window is empty")
    if n_random_trials < 1:
        raise ValueError("n_random_trials must be >= 1")
    n = dataset.n_consumers
    stats = consumer_stats(dataset, "train")
    points: list[CvPoint] = []
    bands: dict[int, tuple[float, float]] = {}
    for s_idx, m in enumerate(sizes):
        if not (1 <= m <= n):
            raise ValueError(f"group size must be in [1, {n}], got {m}")
        trial_cvs = np.empty(n_random_trials)
        for trial in range(n_random_trials):
            rng = np.random.default_rng([seed, s_idx, trial])
            members = rng.choice(n, size=m, replace=False)
            selection = SelectionVector.from_indices(n, members)
            trial_cvs[trial] = backtest_cv(dataset, selection, order=order)
        mean_cv = float(trial_cvs.mean())
        spread = float(trial_cvs.std(ddof=1)) if n_random_trials > 1 else 0.0
        bands[m] = (max(mean_cv - 1.96 * spread, 0.0), mean_cv + 1.96 * spread)
        points.append(CvPoint(m=m, kind="random", cv=mean_cv))

        optimal = solve_min_lambda(stats, m, gamma).selection
        points.append(CvPoint(m=m, kind="optimal", cv=backtest_cv(dataset, optimal, order=order)))
    return CvCurve(points=tuple(points), random_ci=bands)
