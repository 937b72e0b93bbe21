"""Hourly market data: CSV ingestion, alignment, scaling and synthetic generation.

Internal time base is German civil time as (date, hour_index) with the ex-ante
convention: hour_index h covers [h:00, h+1:00).  DST irregularities are handled
at ingestion (fall-back duplicate averaged, spring-forward gap left absent) so
downstream calendar math sees regular 24-slot days.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from zoneinfo import ZoneInfo

import numpy as np

BERLIN = ZoneInfo("Europe/Berlin")


class CsvParseError(ValueError):
    pass


class IntegrityError(ValueError):
    pass


class CoverageError(ValueError):
    pass


class DegenerateScaleError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class HourlyStamp:
    date: date
    hour_index: int

    def __post_init__(self):
        if not 0 <= self.hour_index <= 23:
            raise ValueError(f"hour_index {self.hour_index} outside 0..23")

    @property
    def key(self):
        return self.date.toordinal() * 24 + self.hour_index

    @classmethod
    def from_key(cls, key):
        return cls(date.fromordinal(int(key) // 24), int(key) % 24)


class HourlySeries:
    """Strictly increasing hourly stamps with finite values."""

    def __init__(self, keys, values):
        keys = np.asarray(keys, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if keys.shape != values.shape:
            raise ValueError("stamps and values must have equal length")
        if keys.size > 1 and not np.all(np.diff(keys) > 0):
            raise ValueError("stamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        self._keys = keys
        self._values = values
        self._keys.setflags(write=False)
        self._values.setflags(write=False)

    @classmethod
    def from_stamps(cls, stamps, values):
        return cls([s.key for s in stamps], values)

    @property
    def keys(self):
        return self._keys

    @property
    def values(self):
        return self._values

    @property
    def stamps(self):
        return [HourlyStamp.from_key(k) for k in self._keys]

    def __len__(self):
        return len(self._keys)

    def __eq__(self, other):
        return (
            isinstance(other, HourlySeries)
            and np.array_equal(self._keys, other._keys)
            and np.array_equal(self._values, other._values)
        )

    def window(self, start, end):
        """Sub-series with start <= date < end."""
        lo = np.searchsorted(self._keys, start.toordinal() * 24)
        hi = np.searchsorted(self._keys, end.toordinal() * 24)
        return HourlySeries(self._keys[lo:hi], self._values[lo:hi])

    def day_values(self, d):
        """(hour_indices, values) present for calendar day d."""
        base = d.toordinal() * 24
        lo = np.searchsorted(self._keys, base)
        hi = np.searchsorted(self._keys, base + 24)
        return self._keys[lo:hi] - base, self._values[lo:hi]


@dataclass(frozen=True)
class Dataset:
    price: HourlySeries
    wind: HourlySeries = None
    solar: HourlySeries = None
    dropped: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if (self.wind is None) != (self.solar is None):
            raise ValueError("wind and solar must be supplied together")
        if self.wind is not None:
            if not (
                np.array_equal(self.price.keys, self.wind.keys)
                and np.array_equal(self.price.keys, self.solar.keys)
            ):
                raise ValueError("price, wind and solar must share identical stamps")

    @property
    def has_renewables(self):
        return self.wind is not None

    def window(self, start, end):
        if self.has_renewables:
            return Dataset(
                self.price.window(start, end),
                self.wind.window(start, end),
                self.solar.window(start, end),
            )
        return Dataset(self.price.window(start, end))


@dataclass(frozen=True)
class ScalerParams:
    mean: float
    stddev: float

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValueError("stddev must be strictly positive")


def fit_scaler(training_values):
    """Standard-scaler parameters from training data (population stddev)."""
    v = np.asarray(training_values, dtype=np.float64)
    if v.size < 2 or np.unique(v).size < 2:
        raise DegenerateScaleError("need at least 2 distinct training values")
    std = float(v.std())
    if std == 0.0:
        raise DegenerateScaleError("constant training values")
    return ScalerParams(mean=float(v.mean()), stddev=std)


def apply_scaler(params, x):
    return (x - params.mean) / params.stddev


@dataclass(frozen=True)
class FuturesQuote:
    delivery_start: date
    delivery_end: date  # inclusive
    price: float
    load_shape: str = "base"  # base | peak

    def __post_init__(self):
        if self.delivery_start > self.delivery_end:
            raise ValueError("delivery_start after delivery_end")
        if not math.isfinite(self.price):
            raise ValueError("quote price must be finite")
        if self.load_shape not in ("base", "peak"):
            raise ValueError(f"unknown load shape {self.load_shape!r}")


def _is_fallback_date(d):
    start = datetime(d.year, d.month, d.day, 0, 30, tzinfo=BERLIN)
    end = datetime(d.year, d.month, d.day, 23, 30, tzinfo=BERLIN)
    return end.utcoffset() < start.utcoffset()


def _parse_timestamp(text, line_no):
    try:
        ts = datetime.fromisoformat(text.strip())
    except ValueError:
        raise CsvParseError(f"line {line_no}: malformed timestamp {text!r}") from None
    if ts.tzinfo is not None:
        ts = ts.astimezone(BERLIN).replace(tzinfo=None)
    return HourlyStamp(ts.date(), ts.hour)


def _open_source(source):
    if isinstance(source, (str, bytes)) and not (
        isinstance(source, str) and "\n" in source
    ):
        return open(source, newline="")
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode()
        return io.StringIO(data)
    return io.StringIO(source)


def _sniff_delimiter(header_line):
    return ";" if header_line.count(";") > header_line.count(",") else ","


def load_hourly_csv(source, value_columns):
    """Load one HourlySeries per value column from a timestamped CSV.

    Fall-back duplicate hours are replaced by the mean of their two
    observations; the spring-forward gap stays absent.  Duplicates on
    non-DST days raise IntegrityError.
    """
    fh = _open_source(source)
    try:
        # tolerate leading '#' provenance comments written by our own tools
        header_no = 0
        header_line = ""
        for line in fh:
            header_no += 1
            if line.lstrip().startswith("#"):
                continue
            header_line = line
            break
        if not header_line.strip():
            raise CsvParseError("empty input: header row required")
        delim = _sniff_delimiter(header_line)
        header = [c.strip() for c in header_line.strip().split(delim)]
        missing = [c for c in value_columns if c not in header]
        if missing:
            raise CsvParseError(f"missing columns: {missing}")
        ts_col = 0
        col_pos = {c: header.index(c) for c in value_columns}

        obs = {c: {} for c in value_columns}
        for line_no, row in enumerate(csv.reader(fh, delimiter=delim),
                                      start=header_no + 1):
            if not row or not "".join(row).strip():
                continue
            if row[0].lstrip().startswith("#"):
                continue
            stamp = _parse_timestamp(row[ts_col], line_no)
            for col, pos in col_pos.items():
                try:
                    val = float(row[pos])
                except (ValueError, IndexError):
                    raise CsvParseError(
                        f"line {line_no}: unparseable value in column {col!r}"
                    ) from None
                if not math.isfinite(val):
                    raise CsvParseError(f"line {line_no}: non-finite value in {col!r}")
                obs[col].setdefault(stamp.key, []).append(val)
    finally:
        fh.close()

    out = {}
    for col, by_key in obs.items():
        keys = sorted(by_key)
        values = []
        for k in keys:
            vals = by_key[k]
            if len(vals) == 1:
                values.append(vals[0])
            elif len(vals) == 2 and _is_fallback_date(date.fromordinal(k // 24)):
                values.append(0.5 * (vals[0] + vals[1]))
            else:
                raise IntegrityError(
                    f"duplicate non-DST stamp {HourlyStamp.from_key(k)} in {col!r}"
                )
        out[col] = HourlySeries(keys, values)
    return out


def write_hourly_csv(path, series, value_column="price_eur_mwh", header_comment=None):
    with open(path, "w", newline="") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"timestamp,{value_column}\n")
        for key, val in zip(series.keys, series.values):
            s = HourlyStamp.from_key(key)
            fh.write(f"{s.date.isoformat()}T{s.hour_index:02d}:00,{float(val)!r}\n")


def load_futures_csv(source):
    fh = _open_source(source)
    try:
        quotes = []
        reader = csv.DictReader(
            line for line in fh if not line.lstrip().startswith("#")
        )
        for row in reader:
            quotes.append(
                FuturesQuote(
                    delivery_start=date.fromisoformat(row["delivery_start"].strip()),
                    delivery_end=date.fromisoformat(row["delivery_end"].strip()),
                    price=float(row["price_eur_mwh"]),
                    load_shape=row["load_shape"].strip().lower(),
                )
            )
        return quotes
    finally:
        fh.close()


def align(price, wind=None, solar=None):
    """Inner-join the series on stamps; drop counts recorded per input."""
    if wind is None and solar is None:
        return Dataset(price, dropped={"price": 0})
    common = np.intersect1d(price.keys, wind.keys)
    common = np.intersect1d(common, solar.keys)
    if common.size < 0.9 * len(price):
        raise CoverageError(
            f"overlap {common.size} below 90% of {len(price)} price stamps"
        )
    dropped = {}
    parts = {}
    for name, series in (("price", price), ("wind", wind), ("solar", solar)):
        mask = np.isin(series.keys, common)
        dropped[name] = int(len(series) - common.size)
        parts[name] = HourlySeries(series.keys[mask], series.values[mask])
    return Dataset(parts["price"], parts["wind"], parts["solar"], dropped=dropped)


@dataclass(frozen=True)
class SynthConfig:
    beta_wind: float = 0.01
    beta_solar: float = 0.01
    noise_std: float = 1.0
    base_level: float = 40.0
    year_amplitude: float = 4.0
    month_amplitude: float = 5.0
    daytype_amplitude: float = 6.0
    hour_amplitude: float = 10.0
    wind_mean: float = 800.0
    wind_phi: float = 0.97
    wind_sigma: float = 60.0
    solar_peak: float = 900.0

    @classmethod
    def from_file(cls, path):
        kv = {}
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, _, value = line.partition("=")
                kv[key.strip()] = float(value.strip())
        seed = int(kv.pop("seed", 0))
        return int(seed), cls(**kv)


_DAYTYPE_OFFSET = {1: 0.25, 2: 0.4, 3: 0.1, 4: -0.45, 5: -1.0}


def _hour_shape(hour, quarter, daytype, amplitude):
    # two intra-day peaks, flattened on low-demand day types, seasonal tilt
    base = -math.cos(2 * math.pi * (hour - 3.0) / 24.0) + 0.45 * math.sin(
        4 * math.pi * (hour - 2.0) / 24.0
    )
    damp = 1.0 if daytype <= 3 else 0.55
    tilt = 1.0 + 0.2 * math.cos(2 * math.pi * (quarter - 1) / 4.0)
    return amplitude * base * damp * tilt


def synth_generate(seed, start, end, params=None):
    """Deterministic synthetic Dataset with calendar structure and renewables."""
    from . import calendar as cal

    if start > end:
        raise ValueError("start after end")
    params = params or SynthConfig()
    rng = np.random.default_rng(seed)

    n_days = (end - start).days + 1
    days = [start + timedelta(days=d) for d in range(n_days)]
    keys = np.repeat([d.toordinal() * 24 for d in days], 24) + np.tile(
        np.arange(24), n_days
    )
    n = keys.size

    years = sorted({d.year for d in days})
    year_offset = {y: params.year_amplitude * rng.standard_normal() for y in years}

    # wind: seeded AR(1), clipped at zero
    eps = rng.standard_normal(n)
    wind = np.empty(n)
    w = params.wind_mean
    for i in range(n):
        w = params.wind_mean + params.wind_phi * (w - params.wind_mean) + params.wind_sigma * eps[i]
        w = max(w, 0.0)
        wind[i] = w

    noise = params.noise_std * rng.standard_normal(n)

    price = np.empty(n)
    solar = np.empty(n)
    i = 0
    for d in days:
        dt5 = cal.day_type5(d)
        quarter = (d.month - 1) // 3 + 1
        doy = d.timetuple().tm_yday
        season = math.cos(2 * math.pi * (doy - 172) / 365.25)  # 1 at summer solstice
        half_width = 5.0 + 2.0 * season
        cal_part = (
            params.base_level
            + year_offset[d.year]
            + params.month_amplitude * math.cos(2 * math.pi * (d.month - 1) / 12.0)
            + params.daytype_amplitude * _DAYTYPE_OFFSET[dt5]
        )
        for h in range(24):
            x = (h + 0.5 - 12.5) / half_width
            bell = math.cos(0.5 * math.pi * x) ** 2 if abs(x) < 1.0 else 0.0
            solar[i] = params.solar_peak * max(0.35 + 0.65 * season, 0.1) * bell
            price[i] = (
                cal_part
                + _hour_shape(h, quarter, dt5, params.hour_amplitude)
                - params.beta_wind * wind[i]
                - params.beta_solar * solar[i]
                + noise[i]
            )
            i += 1

    return Dataset(
        HourlySeries(keys, price),
        HourlySeries(keys, wind),
        HourlySeries(keys, solar),
    )
