"""Hourly price forward curves: long-term profile plus additive shifts that
reproduce futures quotes without arbitrage."""

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .data import HourlySeries
from .models import FeatureError, day_keys

PEAK_HOURS = range(8, 20)  # delivery 08:00-20:00


class ArbitrageConflictError(ValueError):
    pass


@dataclass(frozen=True)
class ForwardCurve:
    series: HourlySeries
    profile_id: str = ""
    quote_set_id: str = ""


def build_profile(model, horizon_start, horizon_end):
    """Evaluate a trained calendar-only model hour by hour over the horizon."""
    if horizon_start > horizon_end:
        raise ValueError("horizon_start after horizon_end")
    if getattr(model, "needs_renewables", False):
        raise FeatureError("profile models must not require renewables")
    days = [horizon_start + timedelta(days=i)
            for i in range((horizon_end - horizon_start).days + 1)]
    keys = np.concatenate([day_keys(d) for d in days])
    values = np.concatenate(
        [np.asarray(model.predict_day(d), dtype=np.float64) for d in days]
    )
    return HourlySeries(keys, values)


def _quote_mask(keys, quote):
    lo = quote.delivery_start.toordinal() * 24
    hi = (quote.delivery_end.toordinal() + 1) * 24
    return (keys >= lo) & (keys < hi)


def _peak_mask(keys):
    hours = keys % 24
    weekdays = np.array([date.fromordinal(int(o)).weekday() for o in keys // 24])
    return (weekdays < 5) & (hours >= PEAK_HOURS.start) & (hours < PEAK_HOURS.stop)


def _is_calendar_year(quote):
    s, e = quote.delivery_start, quote.delivery_end
    return s.month == 1 and s.day == 1 and e == date(s.year, 12, 31)


def shift_to_quotes(profile, quotes, profile_id="", quote_set_id=""):
    """Additively shift the profile, finest granularity first, so each quote's
    delivery-period mean matches its price.  Shape within a shift region is
    preserved exactly."""
    keys = profile.keys
    values = profile.values.copy()

    for q in quotes:
        mask = _quote_mask(keys, q)
        if int(mask.sum()) != 24 * ((q.delivery_end - q.delivery_start).days + 1):
            raise ValueError(
                f"quote {q.delivery_start}..{q.delivery_end} outside profile horizon"
            )

    fine = [q for q in quotes if q.load_shape == "base" and not _is_calendar_year(q)]
    years = [q for q in quotes if q.load_shape == "base" and _is_calendar_year(q)]
    peaks = [q for q in quotes if q.load_shape == "peak"]

    covered = np.zeros(len(keys), dtype=bool)
    for q in fine:
        mask = _quote_mask(keys, q)
        if (covered & mask).any():
            raise ValueError("overlapping quotes within one granularity tier")
        covered |= mask
        values[mask] += q.price - values[mask].mean()

    peak_hours = _peak_mask(keys) if peaks else None
    for q in peaks:
        mask = _quote_mask(keys, q) & peak_hours
        if not mask.any():
            raise ValueError("peak quote period contains no peak hours")
        values[mask] += q.price - values[mask].mean()
        # restore any base quote over the same period via the off-peak hours
        for b in fine + years:
            if (b.delivery_start, b.delivery_end) == (q.delivery_start, q.delivery_end):
                bmask = _quote_mask(keys, b)
                off = bmask & ~peak_hours
                if not off.any():
                    raise ArbitrageConflictError(
                        "base and peak quotes conflict: no off-peak hours to adjust"
                    )
                need = b.price * bmask.sum() - values[bmask].sum()
                values[off] += need / off.sum()

    for q in years:
        mask = _quote_mask(keys, q)
        free = mask & ~covered
        residual = q.price - values[mask].mean()
        if not free.any():
            if abs(residual) > 1e-9:
                raise ArbitrageConflictError(
                    f"year quote {q.delivery_start.year} fully covered by finer "
                    f"quotes but inconsistent (residual {residual:.6g})"
                )
            continue
        values[free] += residual * mask.sum() / free.sum()

    return ForwardCurve(HourlySeries(keys, values), profile_id, quote_set_id)


def verify_no_arbitrage(curve, quotes, tolerance=1e-9):
    """Per-quote |delivery-period mean - quote price| residuals."""
    series = curve.series if isinstance(curve, ForwardCurve) else curve
    report = []
    for q in quotes:
        mask = _quote_mask(series.keys, q)
        if q.load_shape == "peak":
            mask &= _peak_mask(series.keys)
        residual = abs(float(series.values[mask].mean()) - q.price) if mask.any() else float("inf")
        report.append({"quote": q, "residual": residual, "pass": residual <= tolerance})
    return report
