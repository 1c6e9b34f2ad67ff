import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ratecraft.ingest import SynthSpec, synth_population
from ratecraft.types import ConsumerSeries, Dataset, HourlyMatrix, PriceSeries

settings.register_profile(
    "det",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("det")

START = dt.date(2021, 1, 4)  # a Monday


def make_dataset(usages, da, rt=None, train_days=None, ids=None, start=START):
    """Assemble a Dataset from raw arrays; 1-D prices are tiled across days."""
    usages = [np.atleast_2d(np.asarray(u, dtype=float)) for u in usages]
    days = usages[0].shape[0]
    da = np.asarray(da, dtype=float)
    if da.ndim == 1:
        da = np.tile(da, (days, 1))
    if rt is None:
        rt = da
    else:
        rt = np.asarray(rt, dtype=float)
        if rt.ndim == 1:
            rt = np.tile(rt, (days, 1))
    prices = PriceSeries(HourlyMatrix(da, start), HourlyMatrix(rt, start))
    if ids is None:
        ids = [f"c{i:03d}" for i in range(len(usages))]
    consumers = tuple(
        ConsumerSeries(cid, HourlyMatrix(u, start)) for cid, u in zip(ids, usages)
    )
    if train_days is None:
        train_days = days
    return Dataset(consumers, prices, train_days=train_days, validate_days=days - train_days)


@pytest.fixture(scope="session")
def synth_small():
    return synth_population(SynthSpec(n_consumers=40, n_days=40, seed=3))


@pytest.fixture(scope="session")
def synth_medium():
    return synth_population(
        SynthSpec(n_consumers=200, n_days=60, fraction_peaky=0.5, noise_cv=0.35, seed=17)
    )
