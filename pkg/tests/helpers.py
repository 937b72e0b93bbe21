"""Shared test utilities: planted long-term-profile generators and oracles."""

from datetime import date, timedelta

import numpy as np

from epfkit.data import Dataset, HourlySeries
from epfkit.models import FeatureFrame


# Month offsets arranged so that within each quarter the two months sharing
# an hour count sit at -A and +A and the remaining month at 0.  Together with
# zero-median hour shapes this makes every median the sequential fit takes
# recover the planted value exactly (each quarter's median lands in the
# middle month, whose own hour multiset is symmetric about zero).
MONTH_AMPLITUDE = 5.0
MONTH_PATTERN = np.array([-1, 0, 1, -1, 0, 1, -1, 1, 0, -1, 0, 1], dtype=float)


def hour_scale(quarter, daytype):
    """Distinct slope per (quarter, day-type) hour cluster; |c_h| <= 0.75."""
    return 0.01 * (quarter + 0.1 * daytype)


def planted_c_m():
    return MONTH_AMPLITUDE * MONTH_PATTERN


def planted_c_h():
    c_h = np.zeros((4, 5, 24))
    hours = np.arange(24) - 11.5
    for q in range(1, 5):
        for dt in range(1, 6):
            c_h[q - 1, dt - 1] = hour_scale(q, dt) * hours
    return c_h


def planted_dummy_series(start=date(2015, 1, 1), end=date(2016, 12, 31),
                         noise_std=0.0, seed=0):
    """Hourly series generated from known dummy-profile coefficients.

    Planted model: c_q = 0, c_m = planted_c_m(), c_d = 0,
    c_h = planted_c_h(); optional additive symmetric noise.
    """
    n_days = (end - start).days + 1
    days = [start + timedelta(days=i) for i in range(n_days)]
    keys = np.concatenate(
        [d.toordinal() * 24 + np.arange(24, dtype=np.int64) for d in days]
    )
    frame = FeatureFrame(keys)
    quarter = (frame.month - 1) // 3 + 1
    c_m = planted_c_m()
    c_h = planted_c_h()
    values = c_m[frame.month - 1] + c_h[quarter - 1, frame.daytype5 - 1, frame.hour]
    if noise_std > 0:
        values = values + noise_std * np.random.default_rng(seed).standard_normal(len(keys))
    return HourlySeries(keys, values)


def brute_force_naive(dataset, d, day_type_fn):
    """Independent oracle: scan backwards day by day for the latest complete
    prior day with the same day type and return its 24 prices."""
    target = day_type_fn(d)
    cand = d - timedelta(days=1)
    first = date.fromordinal(int(dataset.price.keys[0] // 24))
    while cand >= first:
        hours, values = dataset.price.day_values(cand)
        if len(hours) and day_type_fn(cand) == target:
            out = np.empty(24)
            out[:] = np.nan
            out[hours] = values
            # nearest-hour fill, mirroring the documented incomplete-day rule
            present = np.flatnonzero(~np.isnan(out))
            for h in np.flatnonzero(np.isnan(out)):
                out[h] = out[present[np.argmin(np.abs(present - h))]]
            return out
        cand -= timedelta(days=1)
    return None


def daytype_series(start, end, level_by_type, hour_slope=0.0):
    """Series whose value depends only on (day_type5, hour)."""
    from epfkit import calendar as cal

    n_days = (end - start).days + 1
    days = [start + timedelta(days=i) for i in range(n_days)]
    keys = np.concatenate(
        [d.toordinal() * 24 + np.arange(24, dtype=np.int64) for d in days]
    )
    values = np.concatenate([
        np.full(24, level_by_type[cal.day_type5(d)]) + hour_slope * np.arange(24)
        for d in days
    ])
    return HourlySeries(keys, values)


def dataset_of(series):
    return Dataset(series)
