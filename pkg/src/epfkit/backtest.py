"""Rolling daily-recalibration evaluation, MAE tables, profile-quality
deviations (hDev/dDev) and error-seasonality diagnostics."""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from . import calendar as cal
from .data import HourlySeries
from .models import (FeatureFrame, InsufficientHistoryError, day_keys,
                     make_model, subtract_years, _fill_day_vector)


class UndefinedCorrelationError(ValueError):
    pass


def mae(realized, predicted):
    realized = np.asarray(realized, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if realized.shape != predicted.shape or realized.size == 0:
        raise ValueError("mae needs equal nonzero-length vectors")
    return float(np.mean(np.abs(realized - predicted)))


def day_seed(base_seed, d):
    """Order-independent per-day RNG seed."""
    return (int(base_seed) ^ (d.toordinal() * 2654435761)) & 0x7FFFFFFF


@dataclass
class DayRecord:
    date: date
    predictions: np.ndarray = None  # 24 values
    realized: np.ndarray = None     # 24 values, NaN where the hour is absent
    daily_mae: float = None
    n_hours: int = 0
    skip_reason: str = None

    @property
    def skipped(self):
        return self.skip_reason is not None


@dataclass
class BacktestReport:
    model_id: str
    base_seed: int
    records: list = field(default_factory=list)

    def scored(self):
        return [r for r in self.records if not r.skipped]

    def overall_mae(self):
        total = sum(r.daily_mae * r.n_hours for r in self.scored())
        hours = sum(r.n_hours for r in self.scored())
        return total / hours if hours else math.nan

    def yearly_mae(self):
        sums, hours = {}, {}
        for r in self.scored():
            sums[r.date.year] = sums.get(r.date.year, 0.0) + r.daily_mae * r.n_hours
            hours[r.date.year] = hours.get(r.date.year, 0) + r.n_hours
        return {y: sums[y] / hours[y] for y in sorted(sums)}

    def daily_errors(self):
        """(dates, daily MAE vector) over scored days."""
        days = self.scored()
        return [r.date for r in days], np.array([r.daily_mae for r in days])

    def hourly_errors(self):
        """(keys, signed prediction-minus-realized errors) over scored hours."""
        keys, errs = [], []
        for r in self.scored():
            present = ~np.isnan(r.realized)
            base = r.date.toordinal() * 24
            for h in np.flatnonzero(present):
                keys.append(base + h)
                errs.append(r.predictions[h] - r.realized[h])
        return np.array(keys, dtype=np.int64), np.array(errs)

    def to_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            cols = ["date", "n_hours", "daily_mae", "skip_reason"]
            cols += [f"p{h:02d}" for h in range(24)] + [f"r{h:02d}" for h in range(24)]
            fh.write(",".join(cols) + "\n")
            for r in self.records:
                if r.skipped:
                    row = [r.date.isoformat(), "0", "", r.skip_reason] + [""] * 48
                else:
                    row = [r.date.isoformat(), str(r.n_hours), repr(float(r.daily_mae)), ""]
                    row += [repr(float(v)) for v in r.predictions]
                    row += ["" if math.isnan(v) else repr(float(v)) for v in r.realized]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path, model_id=None, base_seed=0):
        records = []
        with open(path, newline="") as fh:
            rows = [line for line in fh if not line.startswith("#")]
        for row in csv.DictReader(rows):
            d = date.fromisoformat(row["date"])
            if row["skip_reason"]:
                records.append(DayRecord(d, skip_reason=row["skip_reason"]))
                continue
            preds = np.array([float(row[f"p{h:02d}"]) for h in range(24)])
            realized = np.array(
                [float(row[f"r{h:02d}"]) if row[f"r{h:02d}"] else math.nan
                 for h in range(24)]
            )
            records.append(
                DayRecord(d, preds, realized, float(row["daily_mae"]),
                          int(row["n_hours"]))
            )
        return cls(model_id or path, base_seed, records)


def _renewables_for_day(dataset, d):
    if not dataset.has_renewables:
        return None
    wh, wv = dataset.wind.day_values(d)
    sh, sv = dataset.solar.day_values(d)
    if len(wv) == 0 or len(sv) == 0:
        return None
    return _fill_day_vector(wh, wv), _fill_day_vector(sh, sv)


def run_single_day(model_spec, dataset, d, window_years=5, base_seed=0,
                   overrides=None):
    seed = day_seed(base_seed, d)
    history = dataset.window(subtract_years(d, window_years), d)
    hours, realized_vals = dataset.price.day_values(d)
    if len(realized_vals) == 0:
        return DayRecord(d, skip_reason="no realized prices")
    model = make_model(model_spec, seed=seed, overrides=overrides)
    renew = _renewables_for_day(dataset, d) if model.needs_renewables else None
    if model.needs_renewables and renew is None:
        return DayRecord(d, skip_reason="renewables forecast unavailable")
    try:
        model.fit(history, as_of=d)
        predictions = np.asarray(model.predict_day(d, renew), dtype=np.float64)
    except InsufficientHistoryError as exc:
        return DayRecord(d, skip_reason=str(exc))
    realized = np.full(24, math.nan)
    realized[hours] = realized_vals
    daily = mae(realized_vals, predictions[hours])
    return DayRecord(d, predictions, realized, daily, len(hours))


_WORKER = {}


def _init_worker(model_spec, dataset, window_years, base_seed, overrides):
    _WORKER.update(
        model_spec=model_spec, dataset=dataset, window_years=window_years,
        base_seed=base_seed, overrides=overrides,
    )


def _worker_day(d):
    return run_single_day(
        _WORKER["model_spec"], _WORKER["dataset"], d,
        _WORKER["window_years"], _WORKER["base_seed"], _WORKER["overrides"],
    )


def rolling_backtest(model_spec, dataset, first_day, last_day, window_years=5,
                     base_seed=0, jobs=1, overrides=None):
    """Refit the model for every day in [first_day, last_day] and score it.

    Each day gets an order-independent seed, so serial, reordered and
    parallel runs produce identical reports.
    """
    if first_day > last_day:
        raise ValueError("first_day after last_day")
    days = [first_day + timedelta(days=i)
            for i in range((last_day - first_day).days + 1)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker,
            initargs=(model_spec, dataset, window_years, base_seed, overrides),
        ) as pool:
            records = list(pool.map(_worker_day, days, chunksize=8))
    else:
        records = [
            run_single_day(model_spec, dataset, d, window_years, base_seed, overrides)
            for d in days
        ]
    return BacktestReport(model_spec, base_seed, records)


def yearly_table(reports):
    """Text table of yearly and overall MAE, one row per report."""
    if not reports:
        raise ValueError("no reports")
    years = sorted({y for r in reports for y in r.yearly_mae()})
    header = ["model"] + [str(y) for y in years] + ["all"]
    rows = [header]
    for r in reports:
        yearly = r.yearly_mae()
        rows.append(
            [r.model_id]
            + [f"{yearly[y]:.4f}" if y in yearly else "-" for y in years]
            + [f"{r.overall_mae():.4f}"]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


@dataclass
class DeviationSeries:
    days: list               # complete days, ascending
    hdev: np.ndarray         # (n_days, 24)
    ddev: np.ndarray         # (n_days,)
    skipped_days: list = field(default_factory=list)


def _complete_days(series):
    day_ords = np.unique(series.keys // 24)
    days, matrix, skipped = [], [], []
    for o in day_ords:
        d = date.fromordinal(int(o))
        hours, values = series.day_values(d)
        if len(hours) == 24:
            days.append(d)
            matrix.append(values)
        else:
            skipped.append(d)
    return days, np.array(matrix) if days else np.zeros((0, 24)), skipped


def deviations(series):
    """hDev (hourly price minus daily mean) and dDev (daily mean minus the
    mean over that day's month); incomplete days are skipped and flagged."""
    days, matrix, skipped = _complete_days(series)
    daily_means = matrix.mean(axis=1) if len(days) else np.zeros(0)
    hdev = matrix - daily_means[:, None]
    months = np.array([(d.year, d.month) for d in days]) if days else np.zeros((0, 2))
    ddev = np.zeros(len(days))
    for ym in {tuple(m) for m in months}:
        mask = (months[:, 0] == ym[0]) & (months[:, 1] == ym[1])
        ddev[mask] = daily_means[mask] - daily_means[mask].mean()
    return DeviationSeries(days, hdev, ddev, skipped)


def hdev(series):
    return deviations(series).hdev


def ddev(series):
    return deviations(series).ddev


def _forecast_series(model, first_day, last_day):
    days = [first_day + timedelta(days=i)
            for i in range((last_day - first_day).days + 1)]
    keys = np.concatenate([day_keys(d) for d in days])
    values = np.concatenate([np.asarray(model.predict_day(d), float) for d in days])
    return HourlySeries(keys, values)


def ltf_eval(model_spec, dataset, eval_years=range(2015, 2020), overrides=None,
             base_seed=0):
    """Per-year MAE of hDev and dDev for yearly-recalibrated profile forecasts.

    For each evaluation year the model is trained on all data from 2010 up to
    Jan 1 of that year, then the whole year is forecast hourly.
    """
    results = {}
    for year in eval_years:
        train_end = date(year, 1, 1)
        history = dataset.window(date(2010, 1, 1), train_end)
        model = (model_spec if hasattr(model_spec, "predict_day")
                 else make_model(model_spec, seed=day_seed(base_seed, train_end),
                                 overrides=overrides))
        if hasattr(model, "fit"):
            model.fit(history, as_of=train_end)
        last = date(year, 12, 31)
        forecast = _forecast_series(model, train_end, last)
        realized = dataset.price.window(train_end, last + timedelta(days=1))
        dev_f = deviations(forecast)
        dev_r = deviations(realized)
        common = sorted(set(dev_f.days) & set(dev_r.days))
        fi = {d: i for i, d in enumerate(dev_f.days)}
        ri = {d: i for i, d in enumerate(dev_r.days)}
        fsel = [fi[d] for d in common]
        rsel = [ri[d] for d in common]
        results[year] = {
            "hdev_mae": mae(dev_r.hdev[rsel].ravel(), dev_f.hdev[fsel].ravel()),
            "ddev_mae": mae(dev_r.ddev[rsel], dev_f.ddev[fsel]),
            "n_days": len(common),
        }
    results["mean"] = {
        "hdev_mae": float(np.mean([results[y]["hdev_mae"] for y in eval_years])),
        "ddev_mae": float(np.mean([results[y]["ddev_mae"] for y in eval_years])),
    }
    return results


def acf(series, max_lag):
    """Sample autocorrelations at lags 1..max_lag."""
    x = np.asarray(series, dtype=np.float64)
    if len(x) <= max_lag:
        raise ValueError("series shorter than max_lag")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0.0:
        raise UndefinedCorrelationError("constant series")
    return np.array([float(x[:-k] @ x[k:]) / denom for k in range(1, max_lag + 1)])


def pacf(series, max_lag):
    """Partial autocorrelations at lags 1..max_lag via the Durbin-Levinson
    recursion on the sample autocorrelations."""
    r = np.concatenate([[1.0], acf(series, max_lag)])
    out = np.empty(max_lag)
    phi = np.zeros(max_lag + 1)
    prev = np.zeros(max_lag + 1)
    out[0] = phi[1] = r[1]
    for k in range(2, max_lag + 1):
        prev[1:k] = phi[1:k]
        num = r[k] - float(prev[1:k] @ r[k - 1 : 0 : -1])
        den = 1.0 - float(prev[1:k] @ r[1:k])
        a = num / den
        phi[k] = a
        phi[1:k] = prev[1:k] - a * prev[k - 1 : 0 : -1]
        out[k - 1] = a
    return out


_GROUP_FIELDS = ("hour", "weekday10", "month", "daytype5")


def group_error_stats(report, group_by):
    """Boxplot quartile records of signed errors per calendar category."""
    if group_by not in _GROUP_FIELDS:
        raise ValueError(f"group_by must be one of {_GROUP_FIELDS}")
    keys, errs = report.hourly_errors()
    frame = FeatureFrame(keys)
    cats = getattr(frame, group_by)
    stats = {}
    for c in np.unique(cats):
        e = errs[cats == c]
        stats[int(c)] = {
            "min": float(e.min()),
            "q1": float(np.percentile(e, 25)),
            "median": float(np.median(e)),
            "mean": float(e.mean()),
            "q3": float(np.percentile(e, 75)),
            "max": float(e.max()),
            "count": int(e.size),
        }
    return stats
