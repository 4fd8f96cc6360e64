import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from readens import aggregate as agg
from readens.errors import ConfigurationError, EmptyInputError

CEIL = agg.AggregationPolicy("mean_ceil")
FLOOR = agg.AggregationPolicy("mean_floor_borderline", 0.5)


class TestMax:
    @pytest.mark.parametrize("members, out", [([3, 7, 5], 7), ([12], 12), ([19, 1], 19)])
    def test_examples(self, members, out):
        assert agg.aggregate_max(members) == out

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            agg.aggregate_max([])


class TestMean:
    def test_ceil(self):
        assert agg.aggregate_mean([10, 11], CEIL) == 11

    def test_floor_borderline(self):
        assert agg.aggregate_mean([10, 11], FLOOR) == 10
        assert agg.aggregate_mean([10, 11, 11], FLOOR) == 11  # frac 2/3 > 0.5

    def test_integer_mean_all_strategies(self):
        for policy in (CEIL, FLOOR, agg.AggregationPolicy("mean-floor", 0.0)):
            assert agg.aggregate_mean([12, 12, 12], policy) == 12
        assert agg.aggregate_max([12, 12, 12]) == 12

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            agg.aggregate_mean([], CEIL)

    @given(st.lists(st.floats(1, 19), min_size=1, max_size=30))
    def test_theta_extremes(self, members):
        m = math.fsum(sorted(members)) / len(members)
        at0 = agg.aggregate_mean(members, agg.AggregationPolicy("mean_floor_borderline", 0.0))
        at1 = agg.aggregate_mean(members, agg.AggregationPolicy("mean_floor_borderline", 1.0))
        if m != math.floor(m):
            assert at0 == agg.aggregate_mean(members, CEIL)
        assert at1 == math.floor(m)

    @given(st.lists(st.floats(1, 19), min_size=1, max_size=30), st.floats(0, 1),
           st.sampled_from(["mean_ceil", "mean_floor_borderline"]))
    def test_within_one_of_mean(self, members, theta, strategy):
        m = sum(members) / len(members)
        assert abs(agg.aggregate_mean(members, agg.AggregationPolicy(strategy, theta)) - m) < 1


def test_policy_validation():
    with pytest.raises(ConfigurationError):
        agg.AggregationPolicy("median")
    with pytest.raises(ConfigurationError):
        agg.AggregationPolicy("max", 1.5)
    with pytest.raises(ConfigurationError):
        agg.AggregationPolicy("max", 0.5, {20})


class TestOverride:
    def test_raises(self):
        assert agg.apply_override(15, [14, 16]) == 16

    def test_no_override_level(self):
        assert agg.apply_override(15, [14, 15]) == 15

    def test_never_lowers(self):
        assert agg.apply_override(18, [16]) == 18

    def test_highest_wins(self):
        assert agg.apply_override(12, [16, 17, 19]) == 17


class TestDocuments:
    values = {"ABC0001-S1": 10.0, "ABC0001-S2": 11.0, "XYZ0002-S1": 15.0, "XYZ0002-S2": 14.6}

    def test_max_groups_by_prefix(self):
        docs = agg.aggregate_documents(self.values, agg.AggregationPolicy("max"))
        assert [(d.doc_id, d.level, d.member_levels) for d in docs] == [
            ("ABC0001", 11, (10, 11)), ("XYZ0002", 15, (15, 15))]

    def test_floor_then_override(self):
        per_model = {"a": {"XYZ0002-S1": 15.0, "XYZ0002-S2": 14.0},
                     "b": {"XYZ0002-S1": 16.0, "XYZ0002-S2": 16.0}}
        policy = agg.AggregationPolicy("mean-floor", 0.5)
        docs = agg.aggregate_documents(self.values, policy, per_model=per_model)
        assert {d.doc_id: d.level for d in docs} == {"ABC0001": 10, "XYZ0002": 16}
        docs = agg.aggregate_documents(self.values, policy, per_model=per_model, override=False)
        # mean 14.8 has fraction 0.8 > theta, so it rounds up
        assert {d.doc_id: d.level for d in docs} == {"ABC0001": 10, "XYZ0002": 15}


class TestSkew:
    def test_all_fifteen(self):
        rep = agg.skew_report([15] * 40)
        assert rep.over_represented == [15]
        assert rep.zero_coverage == [v for v in range(1, 20) if v != 15]

    def test_uniform_no_flags(self):
        rep = agg.skew_report(list(range(1, 20)) * 3)
        assert rep.over_represented == [] and rep.zero_coverage == []

    def test_missing_ten(self):
        preds = [agg.DocPrediction(f"D{i:06d}", lvl, (lvl,))
                 for i, lvl in enumerate(v for v in range(1, 20) if v != 10)]
        rep = agg.skew_report(preds)
        assert rep.zero_coverage == [10] and rep.over_represented == []

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            agg.skew_report([])
