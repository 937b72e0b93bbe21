"""Forecast model zoo: naive, dense networks with three calendar encoders,
LASSO-estimated autoregressive benchmark, and the two long-term profile models."""

import json
import math
import warnings
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from . import calendar as cal
from . import nnkit
from .data import Dataset, HourlySeries, HourlyStamp, apply_scaler, fit_scaler


class FeatureError(ValueError):
    pass


class InsufficientHistoryError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


def subtract_years(d, years):
    try:
        return d.replace(year=d.year - years)
    except ValueError:  # Feb 29
        return d.replace(year=d.year - years, day=28)


_DAY_MEMO = {}


def _day_features(ordinal):
    feat = _DAY_MEMO.get(ordinal)
    if feat is None:
        d = date.fromordinal(ordinal)
        cf = cal.calendar_features(HourlyStamp(d, 0))
        feat = (cf.weekday10, cf.month, cf.year - cal.BASE_YEAR, cf.daytype5)
        _DAY_MEMO[ordinal] = feat
    return feat


class FeatureFrame:
    """Vectorized calendar features for an array of hourly stamp keys."""

    def __init__(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        self.keys = keys
        self.hour = (keys % 24).astype(np.int64)
        day_ords = keys // 24
        uniq, inverse = np.unique(day_ords, return_inverse=True)
        feats = np.array([_day_features(int(o)) for o in uniq], dtype=np.int64)
        self.weekday10 = feats[inverse, 0]
        self.month = feats[inverse, 1]
        self.year_offset = feats[inverse, 2]
        self.daytype5 = feats[inverse, 3]
        self.idx_month_hour = (self.month - 1) * 24 + self.hour
        self.idx_weekday_hour = self.weekday10 * 24 + self.hour

    def embedding_indices(self, variables=cal.EMBEDDING_VARIABLES):
        cols = {
            "hour": self.hour,
            "weekday10": self.weekday10,
            "month": self.month - 1,
            "year": self.year_offset,
            "month_hour": self.idx_month_hour,
            "weekday_hour": self.idx_weekday_hour,
        }
        return np.column_stack([cols[v] for v in variables])

    def ordinal_features(self):
        return np.column_stack(
            [self.weekday10, self.month, self.hour, self.year_offset]
        ).astype(np.float64)

    def circle_features(self):
        m = 2.0 * np.pi * self.month / 12.0
        h = 2.0 * np.pi * self.hour / 24.0
        return np.column_stack(
            [
                self.weekday10.astype(np.float64),
                np.sin(m), np.cos(m), np.sin(h), np.cos(h),
                self.year_offset.astype(np.float64),
            ]
        )


ENCODERS = ("embedding", "ordinal", "circle")


def build_samples(history, encoder, with_renewables, variables=cal.EMBEDDING_VARIABLES):
    """(X_cont, X_idx, targets, scalers) for one training window.

    Renewables are standard-scaled with parameters fit on this window only;
    prices stay raw because they are the output feature.
    """
    if len(history.price) == 0:
        raise InsufficientHistoryError("empty history")
    frame = FeatureFrame(history.price.keys)
    scalers = None
    cont_parts = []
    if with_renewables:
        if not history.has_renewables:
            raise FeatureError("renewables requested but absent from history")
        scalers = (fit_scaler(history.wind.values), fit_scaler(history.solar.values))
        cont_parts.append(apply_scaler(scalers[0], history.wind.values))
        cont_parts.append(apply_scaler(scalers[1], history.solar.values))

    if encoder == "embedding":
        x_idx = frame.embedding_indices(variables)
        x_cont = np.column_stack(cont_parts) if cont_parts else np.zeros((len(frame.keys), 0))
    elif encoder == "ordinal":
        x_idx = None
        x_cont = np.column_stack([frame.ordinal_features(), *[
            p[:, None] for p in cont_parts]]) if cont_parts else frame.ordinal_features()
    elif encoder == "circle":
        x_idx = None
        x_cont = np.column_stack([frame.circle_features(), *[
            p[:, None] for p in cont_parts]]) if cont_parts else frame.circle_features()
    else:
        raise ValueError(f"unknown encoder {encoder!r}")
    return x_cont, x_idx, history.price.values.copy(), scalers


def day_keys(d):
    return d.toordinal() * 24 + np.arange(24, dtype=np.int64)


class ForecastModel:
    """fit(history, as_of) then predict_day(d) -> 24 hourly prices."""

    needs_renewables = False

    def fit(self, history, as_of):
        raise NotImplementedError

    def predict_day(self, d, renewables_forecast=None):
        raise NotImplementedError


def _fill_day_vector(hours, values):
    """Expand possibly incomplete day observations to 24 slots by nearest hour."""
    out = np.empty(24)
    out[:] = np.nan
    out[hours] = values
    missing = np.isnan(out)
    if missing.all():
        raise InsufficientHistoryError("day has no observations")
    if missing.any():
        present = np.flatnonzero(~missing)
        for h in np.flatnonzero(missing):
            out[h] = out[present[np.argmin(np.abs(present - h))]]
    return out


class NaiveModel(ForecastModel):
    """Copies the prices of the most recent prior day of the same day type."""

    def fit(self, history, as_of):
        price = history.price.window(date.min + timedelta(days=1), as_of)
        day_ords = np.unique(price.keys // 24)
        self._days = {}
        for o in day_ords:
            d = date.fromordinal(int(o))
            hours, values = price.day_values(d)
            self._days[int(o)] = _fill_day_vector(hours, values)
        self._day_ords = day_ords
        self._as_of = as_of
        return self

    def predict_day(self, d, renewables_forecast=None):
        target_type = cal.day_type5(d)
        start = min(d, self._as_of)
        for o in range(start.toordinal() - 1, int(self._day_ords[0]) - 1, -1):
            if o in self._days and cal.day_type5(date.fromordinal(o)) == target_type:
                return self._days[o].copy()
        raise InsufficientHistoryError(
            f"no prior day of type {target_type} before {d}"
        )


class DnnModel(ForecastModel):
    def __init__(self, config, encoder, with_renewables,
                 variables=cal.EMBEDDING_VARIABLES, window_years=5):
        if encoder not in ENCODERS:
            raise ValueError(f"unknown encoder {encoder!r}")
        self.config = config
        self.encoder = encoder
        self.with_renewables = with_renewables
        self.needs_renewables = with_renewables
        self.variables = tuple(variables)
        self.window_years = window_years
        self.net = None
        self.scalers = None
        self.loss_trace = None

    def fit(self, history, as_of):
        window = history.window(subtract_years(as_of, self.window_years), as_of)
        if len(window.price) < 360 * 24:
            raise InsufficientHistoryError("need at least one year of history")
        x_cont, x_idx, y, self.scalers = build_samples(
            window, self.encoder, self.with_renewables, self.variables
        )
        emb_spec = []
        if self.encoder == "embedding":
            emb_spec = [(v, *cal.EMBEDDING_SPEC[v]) for v in self.variables]
        self.net = nnkit.Network(
            x_cont.shape[1], emb_spec, self.config, seed=self.config.seed
        )
        self.loss_trace = nnkit.train(self.net, (x_cont, x_idx, y), self.config)
        return self

    def _day_inputs(self, d, renewables_forecast):
        frame = FeatureFrame(day_keys(d))
        cont_parts = []
        if self.with_renewables:
            if renewables_forecast is None:
                raise FeatureError("model needs a (wind, solar) 24-vector pair")
            wind, solar = renewables_forecast
            cont_parts.append(apply_scaler(self.scalers[0], np.asarray(wind, float)))
            cont_parts.append(apply_scaler(self.scalers[1], np.asarray(solar, float)))
        if self.encoder == "embedding":
            x_idx = frame.embedding_indices(self.variables)
            x_cont = np.column_stack(cont_parts) if cont_parts else np.zeros((24, 0))
        else:
            base = frame.ordinal_features() if self.encoder == "ordinal" else frame.circle_features()
            x_cont = np.column_stack([base, *[p[:, None] for p in cont_parts]]) if cont_parts else base
            x_idx = None
        return x_cont, x_idx

    def predict_day(self, d, renewables_forecast=None):
        if self.net is None:
            raise RuntimeError("model not fitted")
        return self.net.predict(*self._day_inputs(d, renewables_forecast))

    def embedding_tables(self):
        if self.encoder != "embedding" or self.net is None:
            raise FeatureError("model has no embedding tables")
        return {
            name: table.data.copy()
            for (name, _, _), table in zip(self.net.emb_spec, self.net.embeddings)
        }


def soft_threshold(z, gamma):
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def lasso_cd(x, y, lam, beta=None, max_sweeps=1000, tol=1e-6):
    """Cyclic coordinate descent on standardized features; y assumed centered."""
    n, p = x.shape
    gram = x.T @ x / n
    corr = x.T @ y / n
    beta = np.zeros(p) if beta is None else beta.copy()
    delta = np.inf
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(p):
            gjj = gram[j, j]
            if gjj <= 0:
                continue
            z = corr[j] - gram[j] @ beta + gjj * beta[j]
            new = soft_threshold(z, lam) / gjj
            delta = max(delta, abs(new - beta[j]))
            beta[j] = new
        if delta < tol:
            break
    else:
        warnings.warn(
            f"lasso did not converge (last delta {delta:.3e})", ConvergenceWarning
        )
    return beta


LEAR_LAGS = (24, 48, 72, 168)


class LearModel(ForecastModel):
    """Univariate autoregressive model with exogenous features, fit by LASSO.

    Features: price lags at 24/48/72/168 hours, scaled day-ahead wind and
    solar (when enabled), day-type/hour/month one-hots.
    """

    def __init__(self, with_renewables=True, window_years=5, n_lambdas=20):
        self.with_renewables = with_renewables
        self.needs_renewables = with_renewables
        self.window_years = window_years
        self.n_lambdas = n_lambdas

    def _features(self, price, frame, lag_values, renew_cols):
        parts = [lag_values]
        if renew_cols is not None:
            parts.append(renew_cols)
        onehot = np.zeros((len(frame.keys), 5 + 24 + 12))
        rows = np.arange(len(frame.keys))
        onehot[rows, frame.daytype5 - 1] = 1.0
        onehot[rows, 5 + frame.hour] = 1.0
        onehot[rows, 29 + frame.month - 1] = 1.0
        parts.append(onehot)
        return np.column_stack(parts)

    def fit(self, history, as_of):
        window = history.window(subtract_years(as_of, self.window_years), as_of)
        price = window.price
        if len(price) < 9 * 24:
            raise InsufficientHistoryError("need at least 8 days plus lags")
        keys = price.keys
        lag_pos = []
        valid = np.ones(len(keys), dtype=bool)
        for lag in LEAR_LAGS:
            pos = np.searchsorted(keys, keys - lag)
            pos = np.clip(pos, 0, len(keys) - 1)
            ok = keys[pos] == keys - lag
            valid &= ok
            lag_pos.append(pos)
        lag_values = np.column_stack([price.values[p] for p in lag_pos])[valid]
        frame = FeatureFrame(keys[valid])

        renew_cols = None
        self.scalers = None
        if self.with_renewables:
            if not window.has_renewables:
                raise FeatureError("renewables requested but absent from history")
            self.scalers = (
                fit_scaler(window.wind.values),
                fit_scaler(window.solar.values),
            )
            renew_cols = np.column_stack(
                [
                    apply_scaler(self.scalers[0], window.wind.values[valid]),
                    apply_scaler(self.scalers[1], window.solar.values[valid]),
                ]
            )

        x = self._features(price, frame, lag_values, renew_cols)
        y = price.values[valid]

        self.feature_means = x.mean(axis=0)
        stds = x.std(axis=0)
        self.feature_stds = np.where(stds > 0, stds, 1.0)
        self.active = stds > 0
        xs = (x - self.feature_means) / self.feature_stds
        xs[:, ~self.active] = 0.0
        self.intercept = float(y.mean())
        yc = y - self.intercept

        n = len(yc)
        n_val = max(1, n // 10)
        xt, yt = xs[: n - n_val], yc[: n - n_val]
        xv, yv = xs[n - n_val :], yc[n - n_val :]
        lam_max = float(np.max(np.abs(xt.T @ yt)) / len(yt))
        grid = np.geomspace(lam_max, lam_max * 1e-3, self.n_lambdas)
        best_lam, best_mse, beta = grid[0], np.inf, None
        for lam in grid:
            beta = lasso_cd(xt, yt, lam, beta=beta)
            mse = float(np.mean((xv @ beta - yv) ** 2))
            if mse < best_mse:
                best_lam, best_mse = lam, mse
        self.lam = best_lam
        self.beta = lasso_cd(xs, yc, best_lam, beta=beta)
        self._history_price = price
        self._as_of = as_of
        return self

    def _lag_vector(self, d, h):
        vals = []
        for lag in LEAR_LAGS:
            key = d.toordinal() * 24 + h - lag
            day = date.fromordinal(key // 24)
            hours, values = self._history_price.day_values(day)
            if len(values) == 0:
                raise InsufficientHistoryError(f"no history for lag day {day}")
            vals.append(_fill_day_vector(hours, values)[key % 24])
        return vals

    def predict_day(self, d, renewables_forecast=None):
        frame = FeatureFrame(day_keys(d))
        lag_values = np.array([self._lag_vector(d, h) for h in range(24)])
        renew_cols = None
        if self.with_renewables:
            if renewables_forecast is None:
                raise FeatureError("model needs a (wind, solar) 24-vector pair")
            wind, solar = renewables_forecast
            renew_cols = np.column_stack(
                [
                    apply_scaler(self.scalers[0], np.asarray(wind, float)),
                    apply_scaler(self.scalers[1], np.asarray(solar, float)),
                ]
            )
        x = self._features(None, frame, lag_values, renew_cols)
        xs = (x - self.feature_means) / self.feature_stds
        xs[:, ~self.active] = 0.0
        return self.intercept + xs @ self.beta


def _median(values):
    return float(np.median(values)) if len(values) else None


def _deseasonalize(price):
    frame_years = np.array([date.fromordinal(int(o)).year for o in price.keys // 24])
    medians = {}
    out = price.values.copy()
    for y in np.unique(frame_years):
        mask = frame_years == y
        med = float(np.median(price.values[mask]))
        medians[int(y)] = med
        out[mask] -= med
    return out, medians


def _quarters(frame):
    return (frame.month - 1) // 3 + 1


@dataclass
class LtfDummyModel(ForecastModel):
    """Long-term profile built from nested median dummy coefficients."""

    c_q: np.ndarray = None
    c_m: np.ndarray = None
    c_d: np.ndarray = None
    c_h: np.ndarray = None
    yearly_median_by_year: dict = None
    fallback_clusters: list = None

    def fit(self, history, as_of=None):
        price = history.price if isinstance(history, Dataset) else history
        if as_of is not None:
            price = price.window(date.min + timedelta(days=1), as_of)
        if len(price) < 360 * 24:
            raise InsufficientHistoryError("need at least one full year")
        deseason, self.yearly_median_by_year = _deseasonalize(price)
        frame = FeatureFrame(price.keys)
        quarter = _quarters(frame)

        self.c_q = np.zeros(4)
        for q in range(1, 5):
            self.c_q[q - 1] = _median(deseason[quarter == q]) or 0.0
        r = deseason - self.c_q[quarter - 1]

        self.c_m = np.zeros(12)
        for m in range(1, 13):
            self.c_m[m - 1] = _median(r[frame.month == m]) or 0.0
        r = r - self.c_m[frame.month - 1]

        self.c_d = np.zeros(5)
        for dt in range(1, 6):
            self.c_d[dt - 1] = _median(r[frame.daytype5 == dt]) or 0.0
        r = r - self.c_d[frame.daytype5 - 1]

        self.c_h, self.fallback_clusters = _fit_hour_clusters(r, quarter, frame)
        return self

    def predict_stamps(self, keys):
        frame = FeatureFrame(keys)
        quarter = _quarters(frame)
        return (
            self.c_q[quarter - 1]
            + self.c_m[frame.month - 1]
            + self.c_d[frame.daytype5 - 1]
            + self.c_h[quarter - 1, frame.daytype5 - 1, frame.hour]
        )

    def predict_day(self, d, renewables_forecast=None):
        return self.predict_stamps(day_keys(d))


def _fit_hour_clusters(residual, quarter, frame):
    """Median per (quarter, day type, hour); empty clusters fall back to the
    day-type median across quarters."""
    c_h = np.zeros((4, 5, 24))
    fallbacks = []
    for q in range(1, 5):
        qmask = quarter == q
        for dt in range(1, 6):
            dmask = qmask & (frame.daytype5 == dt)
            for h in range(24):
                vals = residual[dmask & (frame.hour == h)]
                if len(vals):
                    c_h[q - 1, dt - 1, h] = float(np.median(vals))
                else:
                    parent = residual[(frame.daytype5 == dt) & (frame.hour == h)]
                    c_h[q - 1, dt - 1, h] = _median(parent) or 0.0
                    fallbacks.append((q, dt, h))
    return c_h, fallbacks


HOURS_PER_YEAR = 8760


def hour_of_year(keys):
    """Hour index within the calendar year (restarts each Jan 1)."""
    day_ords = keys // 24
    years = np.array([date.fromordinal(int(o)).year for o in np.atleast_1d(day_ords)])
    jan1 = np.array([date(int(y), 1, 1).toordinal() for y in years])
    return (np.atleast_1d(day_ords) - jan1) * 24 + np.atleast_1d(keys) % 24


@dataclass
class LtfSinusoidalModel(ForecastModel):
    """Long-term profile with a yearly sinusoid plus day-type/hour dummies."""

    a0: float = 0.0
    a1: float = 0.0
    b1: float = 0.0
    c_d: np.ndarray = None
    c_h: np.ndarray = None
    yearly_median_by_year: dict = None
    fallback_clusters: list = None

    def fit(self, history, as_of=None):
        price = history.price if isinstance(history, Dataset) else history
        if as_of is not None:
            price = price.window(date.min + timedelta(days=1), as_of)
        if len(price) < 360 * 24:
            raise InsufficientHistoryError("need at least one full year")
        deseason, self.yearly_median_by_year = _deseasonalize(price)
        frame = FeatureFrame(price.keys)
        quarter = _quarters(frame)

        t = hour_of_year(price.keys)
        design = np.column_stack(
            [
                np.ones(len(t)),
                np.sin(2 * np.pi * t / HOURS_PER_YEAR),
                np.cos(2 * np.pi * t / HOURS_PER_YEAR),
            ]
        )
        coef, *_ = np.linalg.lstsq(design, deseason, rcond=None)
        self.a0, self.a1, self.b1 = map(float, coef)
        r = deseason - design @ coef

        self.c_d = np.zeros(5)
        for dt in range(1, 6):
            self.c_d[dt - 1] = _median(r[frame.daytype5 == dt]) or 0.0
        r = r - self.c_d[frame.daytype5 - 1]
        self.c_h, self.fallback_clusters = _fit_hour_clusters(r, quarter, frame)
        return self

    def predict_stamps(self, keys):
        frame = FeatureFrame(keys)
        quarter = _quarters(frame)
        t = hour_of_year(np.asarray(keys))
        return (
            self.a0
            + self.a1 * np.sin(2 * np.pi * t / HOURS_PER_YEAR)
            + self.b1 * np.cos(2 * np.pi * t / HOURS_PER_YEAR)
            + self.c_d[frame.daytype5 - 1]
            + self.c_h[quarter - 1, frame.daytype5 - 1, frame.hour]
        )

    def predict_day(self, d, renewables_forecast=None):
        return self.predict_stamps(day_keys(d))


def naive_predict(history, d, as_of=None):
    """Brute-force-friendly wrapper around the naive model."""
    model = NaiveModel().fit(history, as_of or d)
    return model.predict_day(d)


_ENCODER_ALIASES = {"emb": "embedding", "ord": "ordinal", "sincos": "circle"}


def make_model(spec, seed=0, overrides=None):
    """Instantiate a model from its string identifier.

    Identifiers: naive, dnn-{emb|ord|sincos}-c{1..5}[+renew], lear[+renew],
    ltf-dummy, ltf-sin.  `overrides` patches NetworkConfig fields.
    """
    overrides = overrides or {}
    base, _, suffix = spec.partition("+")
    with_renewables = suffix == "renew"
    if suffix and not with_renewables:
        raise ValueError(f"unknown model suffix {suffix!r}")

    if base == "naive":
        return NaiveModel()
    if base == "lear":
        return LearModel(with_renewables=with_renewables)
    if base == "ltf-dummy":
        return LtfDummyModel()
    if base == "ltf-sin":
        return LtfSinusoidalModel()
    if base.startswith("dnn-"):
        parts = base.split("-")
        if len(parts) != 3 or parts[1] not in _ENCODER_ALIASES or parts[2] not in nnkit.CONFIGS:
            raise ValueError(f"unknown model identifier {spec!r}")
        config = nnkit.CONFIGS[parts[2]].with_(seed=seed, **overrides)
        return DnnModel(config, _ENCODER_ALIASES[parts[1]], with_renewables)
    raise ValueError(f"unknown model identifier {spec!r}")


def save_model(model, path):
    if not isinstance(model, DnnModel) or model.net is None:
        raise ValueError("only fitted DNN models are serializable")
    net = model.net
    blob = {
        "version": nnkit.FORMAT_VERSION,
        "kind": "dnn",
        "encoder": model.encoder,
        "with_renewables": model.with_renewables,
        "variables": list(model.variables),
        "window_years": model.window_years,
        "scalers": [
            {"mean": s.mean, "stddev": s.stddev} for s in model.scalers
        ] if model.scalers else None,
        "n_cont": net.n_cont,
        "emb_spec": [list(e) for e in net.emb_spec],
        "config": {
            **{k: getattr(net.config, k) for k in (
                "hidden_layers", "hidden_activation", "epochs", "optimizer",
                "learning_rate", "batch_size", "seed", "early_stop_patience",
            )},
            "neurons": list(net.config.neurons),
        },
        "embeddings": [t.data.tolist() for t in net.embeddings],
        "weights": [t.data.tolist() for t in net.weights],
        "biases": [t.data.tolist() for t in net.biases],
    }
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_model(path):
    from .data import ScalerParams

    with open(path) as fh:
        blob = json.load(fh)
    if blob.get("version") != nnkit.FORMAT_VERSION or blob.get("kind") != "dnn":
        raise ValueError("unsupported model file")
    cfg = dict(blob["config"])
    cfg["neurons"] = tuple(cfg["neurons"])
    config = nnkit.NetworkConfig(**cfg)
    model = DnnModel(
        config,
        blob["encoder"],
        blob["with_renewables"],
        variables=tuple(blob["variables"]),
        window_years=blob["window_years"],
    )
    net = nnkit.Network(blob["n_cont"], [tuple(e) for e in blob["emb_spec"]], config, seed=0)
    for t, vals in zip(net.embeddings, blob["embeddings"]):
        t.data = np.asarray(vals, dtype=np.float64)
    for t, vals in zip(net.weights, blob["weights"]):
        t.data = np.asarray(vals, dtype=np.float64)
    for t, vals in zip(net.biases, blob["biases"]):
        t.data = np.asarray(vals, dtype=np.float64)
    model.net = net
    if blob["scalers"]:
        model.scalers = tuple(
            ScalerParams(s["mean"], s["stddev"]) for s in blob["scalers"]
        )
    return model
