"""Holiday taxonomy, day-type clustering and the calendar encoders."""

import math
from datetime import date, timedelta

import pytest

from epfkit import calendar as cal
from epfkit.data import HourlyStamp


# Published Easter Sunday dates (Gregorian), 2010-2019.
EASTER_TABLE = {
    2010: date(2010, 4, 4),
    2011: date(2011, 4, 24),
    2012: date(2012, 4, 8),
    2013: date(2013, 3, 31),
    2014: date(2014, 4, 20),
    2015: date(2015, 4, 5),
    2016: date(2016, 3, 27),
    2017: date(2017, 4, 16),
    2018: date(2018, 4, 1),
    2019: date(2019, 4, 21),
}


def all_days(year):
    d = date(year, 1, 1)
    while d.year == year:
        yield d
        d += timedelta(days=1)


class TestEaster:
    def test_published_table(self):
        for year, expected in EASTER_TABLE.items():
            assert cal.easter_sunday(year) == expected

    def test_derived_holidays_2019(self):
        # Good Friday, Easter Monday, Ascension, Pentecost Monday from the
        # published 2019 Easter date.
        assert cal.classify_holiday(date(2019, 4, 19)) is cal.HolidayKind.PUBLIC
        assert cal.classify_holiday(date(2019, 4, 22)) is cal.HolidayKind.PUBLIC
        assert cal.classify_holiday(date(2019, 5, 30)) is cal.HolidayKind.PUBLIC
        assert cal.classify_holiday(date(2019, 6, 10)) is cal.HolidayKind.PUBLIC

    def test_derived_holidays_against_table_all_years(self):
        for year, e in EASTER_TABLE.items():
            for delta in (-2, 1, 39, 50):
                d = e + timedelta(days=delta)
                assert cal.classify_holiday(d) is cal.HolidayKind.PUBLIC, d
            assert cal.classify_holiday(e + timedelta(days=49)) is cal.HolidayKind.PARTIAL


class TestClassifyHoliday:
    def test_christmas_public(self):
        assert cal.classify_holiday(date(2019, 12, 25)) is cal.HolidayKind.PUBLIC

    def test_friday_after_public_thursday_is_bridge(self):
        # Ascension 2019 fell on Thursday May 30.
        assert cal.classify_holiday(date(2019, 5, 31)) is cal.HolidayKind.BRIDGE

    def test_pentecost_sunday_partial(self):
        assert cal.classify_holiday(date(2019, 6, 9)) is cal.HolidayKind.PARTIAL

    def test_monday_before_public_tuesday_is_bridge(self):
        # May 1 2018 was a Tuesday.
        assert date(2018, 4, 30).weekday() == 0
        assert cal.classify_holiday(date(2018, 4, 30)) is cal.HolidayKind.BRIDGE

    def test_day_between_public_holidays_is_bridge(self):
        # Whoever needs one: a plain weekday flanked by two public holidays.
        table = cal.HolidayTable(overrides={
            date(2019, 7, 15): cal.HolidayKind.PUBLIC,
            date(2019, 7, 17): cal.HolidayKind.PUBLIC,
        })
        assert table.classify(date(2019, 7, 16)) is cal.HolidayKind.BRIDGE

    def test_christmas_week_partial(self):
        for day in (24, 27, 28, 29, 30, 31):
            assert cal.classify_holiday(date(2019, 12, day)) is cal.HolidayKind.PARTIAL, day

    def test_plain_weekday_none(self):
        assert cal.classify_holiday(date(2019, 7, 2)) is cal.HolidayKind.NONE

    def test_unsupported_year(self):
        with pytest.raises(cal.UnsupportedDateError):
            cal.classify_holiday(date(2009, 12, 31))
        with pytest.raises(cal.UnsupportedDateError):
            cal.classify_holiday(date(2031, 1, 1))

    def test_csv_override(self, tmp_path):
        path = tmp_path / "holidays.csv"
        path.write_text("date,kind\n2019-07-02,public\n2019-12-25,none\n")
        table = cal.HolidayTable.from_csv(path)
        assert table.classify(date(2019, 7, 2)) is cal.HolidayKind.PUBLIC
        assert table.classify(date(2019, 12, 25)) is cal.HolidayKind.NONE
        # untouched dates keep the default rules
        assert table.classify(date(2019, 12, 26)) is cal.HolidayKind.PUBLIC


class TestDayType5:
    def test_plain_tuesday(self):
        assert cal.day_type5(date(2019, 7, 2)) == 2

    def test_pentecost_sunday_is_5(self):
        # partial holiday on a Sunday: the Sunday rule wins
        assert cal.day_type5(date(2019, 6, 9)) == 5

    def test_plain_saturday(self):
        assert cal.day_type5(date(2019, 7, 6)) == 4

    def test_monday_friday(self):
        assert cal.day_type5(date(2019, 7, 1)) == 1
        assert cal.day_type5(date(2019, 7, 5)) == 3

    def test_public_holiday_is_5(self):
        assert cal.day_type5(date(2019, 12, 25)) == 5

    def test_bridge_is_4(self):
        assert cal.day_type5(date(2019, 5, 31)) == 4

    def test_partition_2010_2019(self):
        # every date maps to exactly one type in 1..5; union covers the year
        for year in range(2010, 2020):
            for d in all_days(year):
                assert cal.day_type5(d) in (1, 2, 3, 4, 5)

    def test_weekday10_range_and_kind_relation(self):
        for d in all_days(2019):
            cf = cal.calendar_features(HourlyStamp(d, 0))
            assert 0 <= cf.weekday10 <= 9
            assert (cf.kind is cal.HolidayKind.NONE) == (cf.weekday10 < 7)


class TestCalendarFeatures:
    def test_monday_hour0(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 1, 7), 0))
        assert cf.weekday10 == 0
        assert cf.idx_weekday_hour == 0

    def test_public_holiday_hour23(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 12, 25), 23))
        assert cf.weekday10 == 9
        assert cf.idx_weekday_hour == 239

    def test_month_hour_max(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 12, 2), 23))
        assert cf.idx_month_hour == 287

    def test_index_bijectivity(self):
        seen_mh, seen_wh = set(), set()
        for month in range(1, 13):
            for hour in range(24):
                idx = (month - 1) * 24 + hour
                assert idx not in seen_mh
                seen_mh.add(idx)
        for wd in range(10):
            for hour in range(24):
                idx = wd * 24 + hour
                assert idx not in seen_wh
                seen_wh.add(idx)
        assert seen_mh == set(range(288))
        assert seen_wh == set(range(240))


class TestEncoders:
    def test_ordinal_identity(self):
        cf = cal.calendar_features(HourlyStamp(date(2015, 6, 11), 12))
        assert cf.weekday10 == 3
        assert cal.encode_ordinal(cf) == [3.0, 6.0, 12.0, 5.0]

    def test_ordinal_minimums(self):
        cf = cal.calendar_features(HourlyStamp(date(2010, 1, 4), 0))  # plain Monday
        assert cal.encode_ordinal(cf) == [0.0, 1.0, 0.0, 0.0]

    def test_ordinal_maximums_2019(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 12, 25), 23))
        assert cal.encode_ordinal(cf) == [9.0, 12.0, 23.0, 9.0]

    def test_circle_months(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 12, 2), 0))
        vec = cal.encode_circle(cf)
        assert vec[1] == pytest.approx(0.0, abs=1e-12)
        assert vec[2] == pytest.approx(1.0, abs=1e-12)
        cf = cal.calendar_features(HourlyStamp(date(2019, 3, 4), 0))
        vec = cal.encode_circle(cf)
        assert vec[1] == pytest.approx(1.0, abs=1e-12)
        assert vec[2] == pytest.approx(0.0, abs=1e-12)

    def test_circle_hour12(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 7, 2), 12))
        vec = cal.encode_circle(cf)
        assert vec[3] == pytest.approx(0.0, abs=1e-12)
        assert vec[4] == pytest.approx(-1.0, abs=1e-12)

    def test_circle_unit_norm(self):
        for month in range(1, 13):
            for hour in range(24):
                m = 2.0 * math.pi * month / 12.0
                h = 2.0 * math.pi * hour / 24.0
                assert math.sin(m) ** 2 + math.cos(m) ** 2 == pytest.approx(1.0, abs=1e-12)
                assert math.sin(h) ** 2 + math.cos(h) ** 2 == pytest.approx(1.0, abs=1e-12)
        # and via the encoder itself on a sample of stamps
        for hour in range(24):
            cf = cal.calendar_features(HourlyStamp(date(2019, 5, 6), hour))
            vec = cal.encode_circle(cf)
            assert vec[1] ** 2 + vec[2] ** 2 == pytest.approx(1.0, abs=1e-12)
            assert vec[3] ** 2 + vec[4] ** 2 == pytest.approx(1.0, abs=1e-12)


class TestEmbeddingIndices:
    def test_full_set_example(self):
        cf = cal.calendar_features(HourlyStamp(date(2015, 6, 1), 0))  # Monday
        assert cal.embedding_indices(cf) == [0, 0, 5, 5, 120, 0]

    def test_hour_only(self):
        cf = cal.calendar_features(HourlyStamp(date(2015, 6, 1), 23))
        assert cal.embedding_indices(cf, ["hour"]) == [23]

    def test_month_hour_max(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 12, 2), 23))
        assert cal.embedding_indices(cf, ["month_hour"]) == [287]

    def test_indices_in_vocab_range(self):
        for d in (date(2010, 1, 1), date(2019, 12, 31), date(2016, 2, 29)):
            for hour in (0, 11, 23):
                cf = cal.calendar_features(HourlyStamp(d, hour))
                idx = cal.embedding_indices(cf)
                for value, var in zip(idx, cal.EMBEDDING_VARIABLES):
                    vocab, _ = cal.EMBEDDING_SPEC[var]
                    assert 0 <= value < vocab

    def test_unknown_variable(self):
        cf = cal.calendar_features(HourlyStamp(date(2019, 7, 2), 0))
        with pytest.raises(ValueError):
            cal.embedding_indices(cf, ["hour", "nonsense"])
