"""German holiday taxonomy, day-type classification and calendar feature encoders."""

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum

SUPPORTED_YEARS = range(2010, 2031)

# Year vocabulary used by the year embedding: offset from BASE_YEAR.
BASE_YEAR = 2010
YEAR_VOCAB = len(SUPPORTED_YEARS)

EMBEDDING_VARIABLES = ("hour", "weekday10", "month", "year", "month_hour", "weekday_hour")

# (vocab, dim) per embedding variable
EMBEDDING_SPEC = {
    "hour": (24, 6),
    "weekday10": (10, 2),
    "month": (12, 3),
    "year": (YEAR_VOCAB, 3),
    "month_hour": (288, 10),
    "weekday_hour": (240, 15),
}


class UnsupportedDateError(ValueError):
    pass


class HolidayKind(Enum):
    NONE = "none"
    BRIDGE = "bridge"
    PARTIAL = "partial"
    PUBLIC = "public"


def easter_sunday(year):
    """Date of Easter Sunday (Gregorian computus)."""
    a = year % 19
    b, c = divmod(year, 100)
    d, e = divmod(b, 4)
    g = (8 * b + 13) // 25
    h = (19 * a + b - d - g + 15) % 30
    i, k = divmod(c, 4)
    l = (32 + 2 * e + 2 * i - h - k) % 7
    m = (a + 11 * h + 22 * l) // 451
    n, p = divmod(h + l - 7 * m + 114, 31)
    return date(year, n, p + 1)


def _repentance_day(year):
    # Wednesday before November 23
    d = date(year, 11, 22)
    while d.weekday() != 2:
        d -= timedelta(days=1)
    return d


def _public_holidays(year):
    e = easter_sunday(year)
    return {
        date(year, 1, 1),           # New Year's Day
        e - timedelta(days=2),      # Good Friday
        e,                          # Easter Sunday
        e + timedelta(days=1),      # Easter Monday
        date(year, 5, 1),           # First of May
        e + timedelta(days=39),     # Ascension Day
        e + timedelta(days=50),     # Pentecost Monday
        date(year, 10, 3),          # Day of German Unity
        date(year, 12, 25),         # Christmas
        date(year, 12, 26),         # Day after Christmas
    }


def _partial_holidays(year):
    e = easter_sunday(year)
    days = {
        e + timedelta(days=49),     # Pentecost Sunday
        date(year, 8, 15),          # Assumption of Mary
        date(year, 10, 31),         # Reformation Day
        date(year, 11, 1),          # All Hallows Day
        _repentance_day(year),      # Day of Prayer and Repentance
        date(year, 12, 24),
        date(year, 12, 31),
    }
    # Christmas week between the Dec 26 and Dec 31 anchors
    days.update(date(year, 12, d) for d in range(27, 31))
    return days


class HolidayTable:
    """Holiday classification for a range of years; German rules by default,
    overridable from a ``date,kind`` CSV for other markets."""

    def __init__(self, overrides=None):
        self._public = set()
        self._partial = set()
        for year in SUPPORTED_YEARS:
            self._public |= _public_holidays(year)
            self._partial |= _partial_holidays(year)
        self._overrides = dict(overrides) if overrides else {}

    @classmethod
    def from_csv(cls, path):
        overrides = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                overrides[date.fromisoformat(row["date"].strip())] = HolidayKind(
                    row["kind"].strip().lower()
                )
        return cls(overrides=overrides)

    def classify(self, d):
        if d.year not in SUPPORTED_YEARS:
            raise UnsupportedDateError(f"date {d} outside supported range 2010-2030")
        if d in self._overrides:
            return self._overrides[d]
        if d in self._public:
            return HolidayKind.PUBLIC
        if d in self._partial:
            return HolidayKind.PARTIAL
        if self._is_bridge(d):
            return HolidayKind.BRIDGE
        return HolidayKind.NONE

    def _is_public(self, d):
        if d in self._overrides:
            return self._overrides[d] is HolidayKind.PUBLIC
        return d in self._public

    def _is_bridge(self, d):
        one = timedelta(days=1)
        # single day flanked by public holidays
        if self._is_public(d - one) and self._is_public(d + one):
            return True
        # Friday after a public-holiday Thursday
        if d.weekday() == 4 and self._is_public(d - one):
            return True
        # Monday before a public-holiday Tuesday
        if d.weekday() == 0 and self._is_public(d + one):
            return True
        return False


_DEFAULT_TABLE = None


def default_table():
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = HolidayTable()
    return _DEFAULT_TABLE


def classify_holiday(d, table=None):
    return (table or default_table()).classify(d)


def day_type5(d, table=None):
    """Day-type cluster: 1 Mondays, 2 Tue-Thu, 3 Fridays,
    4 Saturdays/partial/bridge, 5 Sundays/public."""
    kind = classify_holiday(d, table)
    wd = d.weekday()
    if wd == 6 or kind is HolidayKind.PUBLIC:
        return 5
    if wd == 5 or kind in (HolidayKind.PARTIAL, HolidayKind.BRIDGE):
        return 4
    if wd == 4:
        return 3
    if wd == 0:
        return 1
    return 2


_KIND_TO_SLOT = {HolidayKind.BRIDGE: 7, HolidayKind.PARTIAL: 8, HolidayKind.PUBLIC: 9}


@dataclass(frozen=True)
class CalendarFeatures:
    year: int
    month: int
    hour: int
    weekday: int
    weekday10: int
    kind: HolidayKind
    daytype5: int
    idx_month_hour: int
    idx_weekday_hour: int


def calendar_features(stamp, table=None):
    """All calendar features for one hourly stamp."""
    d = stamp.date
    kind = classify_holiday(d, table)
    weekday = d.weekday()
    weekday10 = _KIND_TO_SLOT.get(kind, weekday)
    return CalendarFeatures(
        year=d.year,
        month=d.month,
        hour=stamp.hour_index,
        weekday=weekday,
        weekday10=weekday10,
        kind=kind,
        daytype5=day_type5(d, table),
        idx_month_hour=(d.month - 1) * 24 + stamp.hour_index,
        idx_weekday_hour=weekday10 * 24 + stamp.hour_index,
    )


def encode_ordinal(cf):
    """Calendar features as plain numeric inputs."""
    return [float(cf.weekday10), float(cf.month), float(cf.hour), float(cf.year - BASE_YEAR)]


def encode_circle(cf):
    """Month and hour projected onto the unit circle; weekday kept ordinal."""
    m = 2.0 * math.pi * cf.month / 12.0
    h = 2.0 * math.pi * cf.hour / 24.0
    return [
        float(cf.weekday10),
        math.sin(m),
        math.cos(m),
        math.sin(h),
        math.cos(h),
        float(cf.year - BASE_YEAR),
    ]


def embedding_indices(cf, variables=EMBEDDING_VARIABLES):
    """Integer lookup indices for the requested embedding variables."""
    lookup = {
        "hour": cf.hour,
        "weekday10": cf.weekday10,
        "month": cf.month - 1,
        "year": cf.year - BASE_YEAR,
        "month_hour": cf.idx_month_hour,
        "weekday_hour": cf.idx_weekday_hour,
    }
    unknown = set(variables) - set(lookup)
    if unknown:
        raise ValueError(f"unknown embedding variables: {sorted(unknown)}")
    return [lookup[v] for v in variables]
