"""Forecast models: naive, DNN encoders, LASSO benchmark and LTF profiles."""

import warnings
from datetime import date, timedelta

import numpy as np
import pytest

from epfkit import calendar as cal
from epfkit.data import Dataset, HourlySeries, SynthConfig, synth_generate
from epfkit.models import (ConvergenceWarning, DnnModel, FeatureError,
                           InsufficientHistoryError, LearModel, LtfDummyModel,
                           LtfSinusoidalModel, NaiveModel, build_samples,
                           day_keys, hour_of_year, lasso_cd, load_model,
                           make_model, naive_predict, save_model,
                           soft_threshold, subtract_years)
from epfkit.nnkit import CONFIGS
from epfkit.backtest import mae

from helpers import (brute_force_naive, dataset_of, daytype_series,
                     planted_c_h, planted_c_m, planted_dummy_series)


CAL_ONLY = SynthConfig(beta_wind=0.0, beta_solar=0.0, noise_std=0.0)
FAST_TRAIN = {"seed": 1, "learning_rate": 0.005, "batch_size": 128, "epochs": 20}


def flat_series(start, end, value=0.0):
    n_days = (end - start).days + 1
    keys = np.concatenate(
        [(start + timedelta(days=i)).toordinal() * 24 + np.arange(24, dtype=np.int64)
         for i in range(n_days)]
    )
    return HourlySeries(keys, np.full(len(keys), value))


class TestSubtractYears:
    def test_plain(self):
        assert subtract_years(date(2019, 6, 15), 5) == date(2014, 6, 15)

    def test_leap_day(self):
        assert subtract_years(date(2016, 2, 29), 1) == date(2015, 2, 28)


class TestNaive:
    def test_copies_last_same_type_day(self):
        # Monday forecast copies the previous Monday's prices
        series = daytype_series(date(2019, 6, 1), date(2019, 6, 30),
                                {1: 10.0, 2: 20.0, 3: 30.0, 4: 40.0, 5: 50.0},
                                hour_slope=1.0)
        model = NaiveModel().fit(dataset_of(series), as_of=date(2019, 6, 24))
        pred = model.predict_day(date(2019, 6, 24))  # a Monday
        _, expected = series.day_values(date(2019, 6, 17))  # previous Monday
        assert np.array_equal(pred, expected)

    def test_public_holiday_copies_sunday_class(self):
        ds = dataset_of(daytype_series(date(2019, 11, 1), date(2019, 12, 31),
                                       {1: 1.0, 2: 2.0, 3: 3.0, 4: 4.0, 5: 5.0}))
        pred = naive_predict(ds, date(2019, 12, 25))
        assert np.all(pred == 5.0)

    def test_single_prior_day_verbatim(self):
        series = daytype_series(date(2019, 6, 3), date(2019, 6, 3), {1: 7.0})
        model = NaiveModel().fit(dataset_of(series), as_of=date(2019, 6, 17))
        pred = model.predict_day(date(2019, 6, 17))  # a later plain Monday
        assert np.all(pred == 7.0)

    def test_no_prior_day_errors(self):
        series = daytype_series(date(2019, 6, 4), date(2019, 6, 5),
                                {2: 1.0})  # Tue/Wed only
        model = NaiveModel().fit(dataset_of(series), as_of=date(2019, 6, 8))
        with pytest.raises(InsufficientHistoryError):
            model.predict_day(date(2019, 6, 8))  # Saturday, no type-4 history

    def test_matches_brute_force_oracle(self):
        ds = synth_generate(17, date(2014, 1, 1), date(2016, 12, 31))
        for offset in range(0, 330, 13):
            d = date(2016, 1, 15) + timedelta(days=offset)
            model = NaiveModel().fit(ds, as_of=d)
            expected = brute_force_naive(ds, d, cal.day_type5)
            assert np.array_equal(model.predict_day(d), expected), d


class TestBuildSamples:
    def test_five_year_sample_count(self):
        ds = synth_generate(1, date(2010, 1, 1), date(2014, 12, 31), CAL_ONLY)
        x_cont, x_idx, y, _ = build_samples(ds, "embedding", False)
        assert len(y) == 43824  # 2012 is a leap year
        assert x_idx.shape == (43824, 6)

    def test_without_renewables_no_continuous_inputs(self):
        ds = synth_generate(1, date(2015, 1, 1), date(2015, 1, 31), CAL_ONLY)
        x_cont, _, _, scalers = build_samples(ds, "embedding", False)
        assert x_cont.shape[1] == 0
        assert scalers is None

    def test_scaled_wind_mean_zero(self):
        ds = synth_generate(1, date(2015, 1, 1), date(2015, 3, 31))
        x_cont, _, _, _ = build_samples(ds, "embedding", True)
        assert abs(x_cont[:, 0].mean()) < 1e-9
        assert abs(x_cont[:, 0].std() - 1.0) < 1e-9

    def test_renewables_requested_but_absent(self):
        ds = dataset_of(flat_series(date(2015, 1, 1), date(2015, 1, 31)))
        with pytest.raises(FeatureError):
            build_samples(ds, "embedding", True)

    def test_targets_raw_prices(self):
        ds = synth_generate(1, date(2015, 1, 1), date(2015, 1, 31))
        _, _, y, _ = build_samples(ds, "ordinal", True)
        assert np.array_equal(y, ds.price.values)


class TestDnn:
    def test_noiseless_calendar_in_sample_mae(self):
        ds = synth_generate(3, date(2015, 1, 1), date(2016, 12, 31), CAL_ONLY)
        cfg = CONFIGS["c2"].with_(**FAST_TRAIN)
        model = DnnModel(cfg, "embedding", False, window_years=2)
        model.fit(ds, as_of=date(2017, 1, 1))
        errs = []
        for offset in range(0, 214, 1):
            d = date(2016, 6, 1) + timedelta(days=offset)
            _, realized = ds.price.day_values(d)
            errs.append(mae(realized, model.predict_day(d)))
        assert float(np.mean(errs)) < 0.5

    def test_embedding_beats_ordinal_on_seasonal_data(self):
        params = SynthConfig(beta_wind=0.0, beta_solar=0.0, noise_std=1.0)
        ds = synth_generate(5, date(2015, 1, 1), date(2017, 1, 31), params)
        results = {}
        for encoder in ("embedding", "ordinal"):
            cfg = CONFIGS["c2"].with_(**{**FAST_TRAIN, "seed": 2})
            model = DnnModel(cfg, encoder, False, window_years=2)
            model.fit(ds, as_of=date(2017, 1, 1))
            errs = []
            for offset in range(31):
                d = date(2017, 1, 1) + timedelta(days=offset)
                _, realized = ds.price.day_values(d)
                errs.append(mae(realized, model.predict_day(d)))
            results[encoder] = float(np.mean(errs))
        assert results["embedding"] <= results["ordinal"]

    def test_predict_day_shape_and_finiteness(self):
        ds = synth_generate(3, date(2015, 1, 1), date(2016, 6, 30), CAL_ONLY)
        cfg = CONFIGS["c2"].with_(seed=1, epochs=1)
        model = DnnModel(cfg, "circle", False, window_years=2)
        model.fit(ds, as_of=date(2016, 7, 1))
        pred = model.predict_day(date(2016, 7, 1))
        assert pred.shape == (24,)
        assert np.all(np.isfinite(pred))

    def test_needs_one_year_history(self):
        ds = synth_generate(3, date(2016, 1, 1), date(2016, 6, 30), CAL_ONLY)
        cfg = CONFIGS["c2"].with_(seed=1, epochs=1)
        model = DnnModel(cfg, "embedding", False)
        with pytest.raises(InsufficientHistoryError):
            model.fit(ds, as_of=date(2016, 7, 1))

    def test_renewables_forecast_required_at_predict(self):
        ds = synth_generate(3, date(2015, 1, 1), date(2016, 6, 30))
        cfg = CONFIGS["c2"].with_(seed=1, epochs=1)
        model = DnnModel(cfg, "embedding", True, window_years=1)
        model.fit(ds, as_of=date(2016, 6, 1))
        with pytest.raises(FeatureError):
            model.predict_day(date(2016, 6, 1))


class TestSoftThreshold:
    def test_examples(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-3.0, 1.0) == -2.0
        assert soft_threshold(0.0, 1.0) == 0.0


class TestLassoCd:
    def test_lambda_zero_orthonormal_equals_ols(self):
        rng = np.random.default_rng(0)
        raw = rng.standard_normal((200, 4))
        q, _ = np.linalg.qr(raw)
        x = q * np.sqrt(200)  # columns orthonormal under the 1/n inner product
        beta_true = np.array([1.0, -2.0, 0.0, 0.5])
        y = x @ beta_true
        beta = lasso_cd(x, y, lam=0.0)
        ols, *_ = np.linalg.lstsq(x, y, rcond=None)
        assert np.allclose(beta, ols, atol=1e-8)

    def test_large_lambda_zeroes_everything(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((100, 5))
        y = rng.standard_normal(100)
        lam_max = float(np.max(np.abs(x.T @ y)) / 100)
        beta = lasso_cd(x, y, lam=lam_max * 1.01)
        assert np.all(beta == 0.0)

    def test_kkt_conditions_at_convergence(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((300, 8))
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        beta_true = np.array([2.0, -1.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5])
        y = x @ beta_true + 0.1 * rng.standard_normal(300)
        y = y - y.mean()
        lam = 0.1
        beta = lasso_cd(x, y, lam)
        grad = x.T @ (y - x @ beta) / 300
        for j in range(8):
            if beta[j] == 0.0:
                assert abs(grad[j]) <= lam + 1e-4
            else:
                assert grad[j] == pytest.approx(lam * np.sign(beta[j]), abs=1e-4)

    def test_non_convergence_warns_but_returns(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 3))
        y = rng.standard_normal(50)
        with pytest.warns(ConvergenceWarning):
            beta = lasso_cd(x, y, lam=0.01, max_sweeps=1)
        assert beta.shape == (3,)


class TestLear:
    def test_fit_and_predict(self):
        ds = synth_generate(7, date(2015, 1, 1), date(2016, 6, 30))
        model = LearModel(with_renewables=True, window_years=1)
        model.fit(ds, as_of=date(2016, 6, 1))
        wind = np.full(24, 800.0)
        solar = np.zeros(24)
        pred = model.predict_day(date(2016, 6, 1), (wind, solar))
        assert pred.shape == (24,)
        assert np.all(np.isfinite(pred))

    def test_learns_autoregressive_structure(self):
        # weekly-periodic deterministic data is perfectly predictable from
        # the 168-hour lag; LEAR should get close
        series = daytype_series(date(2015, 6, 1), date(2016, 5, 31),
                                {1: 10.0, 2: 20.0, 3: 30.0, 4: 40.0, 5: 50.0},
                                hour_slope=0.5)
        model = LearModel(with_renewables=False, window_years=1)
        model.fit(dataset_of(series), as_of=date(2016, 5, 2))
        pred = model.predict_day(date(2016, 5, 2))  # a plain Monday
        _, realized = series.day_values(date(2016, 5, 2))
        assert mae(realized, pred) < 1.0

    def test_insufficient_history(self):
        ds = synth_generate(7, date(2016, 6, 1), date(2016, 6, 5))
        with pytest.raises(InsufficientHistoryError):
            LearModel().fit(ds, as_of=date(2016, 6, 5))


class TestLtfDummy:
    def test_constant_series_all_zero(self):
        ds = dataset_of(flat_series(date(2015, 1, 1), date(2015, 12, 31), 42.0))
        model = LtfDummyModel().fit(ds)
        assert np.all(model.c_q == 0.0)
        assert np.all(model.c_m == 0.0)
        assert np.all(model.c_d == 0.0)
        assert np.all(model.c_h == 0.0)
        assert np.all(model.predict_day(date(2015, 7, 1)) == 0.0)

    def test_sunday_offset_recovered(self):
        series = daytype_series(date(2015, 1, 1), date(2016, 12, 31),
                                {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0, 5: -10.0})
        model = LtfDummyModel().fit(dataset_of(series))
        assert model.c_d[4] - model.c_d[0] == pytest.approx(-10.0, abs=1e-9)

    def test_planted_coefficients_recovered_exactly(self):
        model = LtfDummyModel().fit(dataset_of(planted_dummy_series()))
        assert np.allclose(model.c_q, 0.0, atol=1e-9)
        assert np.allclose(model.c_m, planted_c_m(), atol=1e-9)
        assert np.allclose(model.c_d, 0.0, atol=1e-9)
        assert np.allclose(model.c_h, planted_c_h(), atol=1e-9)
        assert model.fallback_clusters == []

    def test_predictions_reproduce_planted_data(self):
        series = planted_dummy_series()
        model = LtfDummyModel().fit(dataset_of(series))
        assert np.allclose(model.predict_stamps(series.keys), series.values,
                           atol=1e-9)

    def test_year_constant_shift_absorbed(self):
        series = planted_dummy_series()
        shifted = HourlySeries(series.keys, series.values + 37.0)
        a = LtfDummyModel().fit(dataset_of(series))
        b = LtfDummyModel().fit(dataset_of(shifted))
        assert np.allclose(a.c_h, b.c_h, atol=1e-9)
        assert np.allclose(a.predict_stamps(series.keys),
                           b.predict_stamps(series.keys), atol=1e-9)

    def test_requires_one_year(self):
        ds = dataset_of(flat_series(date(2015, 1, 1), date(2015, 6, 30)))
        with pytest.raises(InsufficientHistoryError):
            LtfDummyModel().fit(ds)


class TestLtfSinusoidal:
    def test_planted_sinusoid_recovered(self):
        days = (date(2016, 12, 31) - date(2015, 1, 1)).days + 1
        keys = np.concatenate(
            [(date(2015, 1, 1) + timedelta(days=i)).toordinal() * 24
             + np.arange(24, dtype=np.int64) for i in range(days)]
        )
        t = hour_of_year(keys)
        series = HourlySeries(keys, 5.0 + 2.0 * np.sin(2 * np.pi * t / 8760.0))
        model = LtfSinusoidalModel().fit(dataset_of(series))
        assert model.a0 == pytest.approx(5.0 - np.median(series.values), abs=1e-2)
        assert model.a1 == pytest.approx(2.0, abs=1e-6)
        assert model.b1 == pytest.approx(0.0, abs=1e-4)

    def test_flat_series_zero_amplitude(self):
        ds = dataset_of(flat_series(date(2015, 1, 1), date(2015, 12, 31), 8.0))
        model = LtfSinusoidalModel().fit(ds)
        assert abs(model.a1) < 1e-9
        assert abs(model.b1) < 1e-9

    def test_yearly_periodicity_up_to_dummies(self):
        ds = synth_generate(9, date(2014, 1, 1), date(2016, 12, 31), CAL_ONLY)
        model = LtfSinusoidalModel().fit(ds)
        # same calendar position one year apart (equal hour-of-year), both
        # plain Tue-Thu days, so the dummies agree too
        a = model.predict_day(date(2017, 6, 6))   # Tuesday, day of year 157
        b = model.predict_day(date(2018, 6, 6))   # Wednesday, day of year 157
        assert np.allclose(a, b, atol=1e-9)


class TestLeakageBan:
    def models(self):
        yield NaiveModel()
        yield LtfDummyModel()
        yield LtfSinusoidalModel()
        yield LearModel(with_renewables=False, window_years=1)
        yield DnnModel(CONFIGS["c2"].with_(seed=1, epochs=1), "embedding",
                       False, window_years=1)

    def test_future_perturbation_has_no_effect(self):
        ds = synth_generate(21, date(2015, 1, 1), date(2016, 12, 31), CAL_ONLY)
        as_of = date(2016, 6, 1)
        cutoff = as_of.toordinal() * 24
        tampered_values = ds.price.values.copy()
        tampered_values[ds.price.keys >= cutoff] += 1000.0
        tampered = Dataset(HourlySeries(ds.price.keys, tampered_values))
        clean = Dataset(ds.price)
        probe = date(2016, 5, 31)
        for model_a, model_b in zip(self.models(), self.models()):
            model_a.fit(clean, as_of=as_of)
            model_b.fit(tampered, as_of=as_of)
            assert np.array_equal(model_a.predict_day(probe),
                                  model_b.predict_day(probe)), type(model_a)


class TestRegistry:
    def test_known_identifiers(self):
        assert isinstance(make_model("naive"), NaiveModel)
        assert isinstance(make_model("lear+renew"), LearModel)
        assert isinstance(make_model("ltf-dummy"), LtfDummyModel)
        assert isinstance(make_model("ltf-sin"), LtfSinusoidalModel)
        dnn = make_model("dnn-emb-c3+renew", seed=5)
        assert isinstance(dnn, DnnModel)
        assert dnn.encoder == "embedding"
        assert dnn.needs_renewables
        assert dnn.config.neurons == (2285, 1024)
        assert dnn.config.seed == 5
        assert make_model("dnn-sincos-c1").encoder == "circle"
        assert make_model("dnn-ord-c2").encoder == "ordinal"

    def test_overrides_patch_config(self):
        dnn = make_model("dnn-emb-c2", overrides={"learning_rate": 0.01,
                                                  "batch_size": 32})
        assert dnn.config.learning_rate == 0.01
        assert dnn.config.batch_size == 32

    def test_unknown_identifiers_rejected(self):
        for bad in ("dnn-emb-c9", "dnn-foo-c2", "naive+wind", "frobnicate"):
            with pytest.raises(ValueError):
                make_model(bad)


class TestModelSerialization:
    def test_dnn_round_trip(self, tmp_path):
        ds = synth_generate(3, date(2015, 1, 1), date(2016, 6, 30))
        cfg = CONFIGS["c2"].with_(seed=1, epochs=1)
        model = DnnModel(cfg, "embedding", True, window_years=1)
        model.fit(ds, as_of=date(2016, 6, 1))
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        renew = (np.full(24, 700.0), np.zeros(24))
        d = date(2016, 6, 1)
        assert np.array_equal(model.predict_day(d, renew),
                              back.predict_day(d, renew))

    def test_unfitted_model_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_model(NaiveModel(), tmp_path / "x.json")
