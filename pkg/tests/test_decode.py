import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from readens import decode as dec
from readens.errors import ConfigurationError, InsufficientDataError, ValidationError
from readens.records import HeadOutput


def cls(probs):
    return HeadOutput("ABC0001-S1", "cls", "classification", class_probs=tuple(probs))


def reg(score, model="reg"):
    return HeadOutput("ABC0001-S1", model, "regression", score=score)


def ordn(th):
    return HeadOutput("ABC0001-S1", "ord", "ordinal", threshold_probs=tuple(th))


CAL = dec.CalibrationStats("reg", 1.0, 1e-6)


class TestClassification:
    def test_one_hot(self):
        p = [0.0] * 19
        p[11] = 1.0
        d = dec.decode_classification(cls(p))
        assert (d.level, d.raw_score, d.confidence) == (12, 12.0, 1.0)

    def test_uniform_ties_go_low(self):
        d = dec.decode_classification(cls([1 / 19] * 19))
        assert d.level == 1 and d.confidence == pytest.approx(1 / 19)

    def test_two_mass_points(self):
        p = [0.0] * 19
        p[4], p[9] = 0.6, 0.4
        d = dec.decode_classification(cls(p))
        assert (d.level, d.confidence) == (5, 0.6)


class TestRegression:
    def test_round_down(self):
        d = dec.decode_regression(reg(11.4), CAL)
        assert d.level == 11 and d.confidence == pytest.approx(1 / (1 + 1e-6), rel=1e-15)

    def test_clamped(self):
        d = dec.decode_regression(reg(25.0), CAL)
        assert d.raw_score == 19.0 and d.level == 19
        assert dec.decode_regression(reg(-3.0), CAL).level == 1

    def test_half_away(self):
        assert dec.decode_regression(reg(11.5), CAL).level == 12

    def test_missing_calibration(self):
        with pytest.raises(ConfigurationError, match="other"):
            dec.decode_regression(reg(5.0, "other"), {"reg": CAL})


class TestOrdinal:
    def test_all_passed(self):
        d = dec.decode_ordinal(ordn([1.0] * 18))
        assert (d.level, d.raw_score, d.confidence) == (19, 19.0, 1.0)

    def test_none_passed(self):
        d = dec.decode_ordinal(ordn([0.0] * 18))
        assert (d.level, d.raw_score, d.confidence) == (1, 1.0, 1.0)

    def test_mixed(self):
        d = dec.decode_ordinal(ordn([0.9] * 7 + [0.1] * 11))
        assert d.level == 8
        assert d.raw_score == pytest.approx(8.4, abs=1e-12)
        assert d.confidence == pytest.approx(0.8, abs=1e-12)

    @given(st.lists(st.floats(0, 1), min_size=18, max_size=18), st.integers(0, 17), st.floats(0, 1))
    def test_monotone_in_each_threshold(self, th, k, bump):
        raised = list(th)
        raised[k] = max(th[k], bump)
        assert dec.decode_ordinal(ordn(raised)).level >= dec.decode_ordinal(ordn(th)).level

    @given(st.lists(st.floats(0, 1), min_size=18, max_size=18))
    def test_rank_consistency(self, th):
        th = sorted(th, reverse=True)
        level = dec.decode_ordinal(ordn(th)).level
        if level >= 2:
            assert th[level - 2] > 0.5
        if level <= 18:
            assert th[level - 1] <= 0.5

    @given(st.lists(st.floats(0, 1), min_size=18, max_size=18))
    def test_ranges(self, th):
        d = dec.decode_ordinal(ordn(th))
        assert 1 <= d.level <= 19 and 0.0 <= d.confidence <= 1.0


@given(st.floats(-100, 100), st.floats(0, 50))
def test_regression_ranges(score, var):
    d = dec.decode_regression(reg(score), dec.CalibrationStats("reg", var))
    assert 1 <= d.level <= 19
    assert 0 < d.confidence <= 1 / dec.DEFAULT_EPSILON


@given(st.lists(st.floats(0.001, 1), min_size=19, max_size=19))
def test_classification_ranges(w):
    d = dec.decode_classification(cls([v / sum(w) for v in w]))
    assert 1 <= d.level <= 19 and 0 < d.confidence <= 1


class TestCalibration:
    def test_zero_residuals(self):
        s = dec.calibrate_regression([(3.0, 3), (7.0, 7)])
        assert s.residual_variance == 0.0 and s.confidence == pytest.approx(1e6)

    def test_plus_minus_one(self):
        assert dec.calibrate_regression([(4.0, 3), (6.0, 7)]).residual_variance == 1.0

    def test_single_pair(self):
        with pytest.raises(InsufficientDataError):
            dec.calibrate_regression([(4.0, 3)])

    def test_fit_and_persist(self, tmp_path):
        heads = [reg(4.0), HeadOutput("ABC0001-S2", "reg", "regression", score=6.0),
                 cls([1 / 19] * 19)]
        stats = dec.fit_calibration(heads, {"ABC0001-S1": 3, "ABC0001-S2": 7})
        assert list(stats) == ["reg"] and stats["reg"].residual_variance == 1.0
        dec.save_calibration(stats, tmp_path / "cal.json")
        assert json.loads((tmp_path / "cal.json").read_text())["reg"]["residual_variance"] == 1.0
        assert dec.load_calibration(tmp_path / "cal.json") == stats

    def test_bad_file(self, tmp_path):
        (tmp_path / "cal.json").write_text('{"reg": {"residual_variance": -1}}')
        with pytest.raises(ValidationError):
            dec.load_calibration(tmp_path / "cal.json")
