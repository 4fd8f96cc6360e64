import itertools
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from readens import fusion
from readens.decode import DecodedPrediction
from readens.errors import EmptyInputError, ValidationError


def pred(p, c, model="m", sid="ABC0001-S1", raw=None):
    return DecodedPrediction(sid, model, p, float(p if raw is None else raw), c)


def weighted_oracle(ps, cs):
    return sum(p * c for p, c in zip(ps, cs)) / sum(cs)


class TestWeighted:
    def test_example(self):
        f = fusion.fuse_weighted([pred(10, 0.9, "a"), pred(12, 0.1, "b")])
        assert f.value == pytest.approx(10.2, abs=1e-12) and f.level == 10

    def test_single_identity(self):
        f = fusion.fuse_weighted([pred(7, 0.3, "a", raw=7.3)], use_raw=True)
        assert f.value == 7.3 and f.level == 7

    def test_equal_confidences_mean(self):
        f = fusion.fuse_weighted([pred(4, 0.5, "a"), pred(9, 0.5, "b"), pred(11, 0.5, "c")])
        assert f.value == pytest.approx(8.0)

    def test_raw_vs_level(self):
        ps = [pred(10, 1.0, "a", raw=10.4), pred(12, 1.0, "b", raw=11.6)]
        assert fusion.fuse_weighted(ps).value == 11.0
        assert fusion.fuse_weighted(ps, use_raw=True).value == pytest.approx(11.0)
        ps = [pred(10, 1.0, "a", raw=10.4), pred(11, 1.0, "b", raw=10.6)]
        assert fusion.fuse_weighted(ps).level == 11  # 10.5 rounds away from zero
        assert fusion.fuse_weighted(ps, use_raw=True).level == 11

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            fusion.fuse_weighted([])
        with pytest.raises(ValidationError, match="different"):
            fusion.fuse_weighted([pred(3, 1, "a"), pred(4, 1, "b", sid="XYZ0001-S1")])
        with pytest.raises(ValidationError, match="zero"):
            fusion.fuse_weighted([pred(3, 0.0, "a"), pred(4, 0.0, "b")])

    def test_contributors_recorded(self):
        f = fusion.fuse_weighted([pred(12, 0.1, "b"), pred(10, 0.9, "a")])
        assert f.contributors == (("a", 10.0, 0.9), ("b", 12.0, 0.1))


ensembles = st.lists(
    st.tuples(st.integers(1, 19), st.floats(1e-3, 1.0)), min_size=1, max_size=8
)


@given(ensembles)
def test_convex_and_matches_formula(members):
    ps = [pred(p, c, f"m{i}") for i, (p, c) in enumerate(members)]
    f = fusion.fuse_weighted(ps)
    lo, hi = min(p for p, _ in members), max(p for p, _ in members)
    assert lo <= f.value <= hi
    assert f.value == pytest.approx(weighted_oracle(*zip(*members)), rel=1e-12)


@given(ensembles, st.floats(1e-3, 1e6))
def test_scale_invariance(members, k):
    ps = [pred(p, c, f"m{i}") for i, (p, c) in enumerate(members)]
    assert fusion.fusion_confidence_scale_invariance_check(ps, k)
    assert fusion.fusion_confidence_scale_invariance_check(ps, 1.0, tol=0.0)
    assert fusion.fusion_confidence_scale_invariance_check(ps, 2.0, tol=0.0)


@given(ensembles, st.randoms())
def test_permutation_invariance(members, rnd):
    ps = [pred(p, c, f"m{i}") for i, (p, c) in enumerate(members)]
    shuffled = list(ps)
    rnd.shuffle(shuffled)
    assert fusion.fuse_weighted(shuffled) == fusion.fuse_weighted(ps)


class TestPair:
    @pytest.mark.parametrize("a, b, e", [(10, 11, 11), (11, 10, 11), (10, 14, 12), (7, 7, 7), (3, 6, 4.5)])
    def test_examples(self, a, b, e):
        assert fusion.fuse_pair(a, b) == e

    def test_exhaustive(self):
        for a, b in itertools.product(range(1, 20), repeat=2):
            e = fusion.fuse_pair(a, b)
            assert e == fusion.fuse_pair(b, a)
            assert min(a, b) <= e <= max(a, b)
            assert e == (max(a, b) if abs(a - b) == 1 else (a + b) / 2)

    def test_pair_predictions_level(self):
        f = fusion.fuse_pair_predictions([pred(3, 1, "a"), pred(6, 1, "b")])
        assert f.value == 4.5 and f.level == 5


class TestFuseAll:
    def test_partial_ensemble_warns(self, caplog):
        ps = [pred(4, 1, "a", "ABC0001-S1"), pred(6, 1, "b", "ABC0001-S1"),
              pred(9, 1, "a", "ABC0001-S2")]
        with caplog.at_level(logging.WARNING):
            out = fusion.fuse_all(ps)
        assert [f.value for f in out] == [5.0, 9.0]
        assert "ABC0001-S2" in caplog.text

    def test_pair_needs_two_models(self):
        ps = [pred(4, 1, m) for m in "abc"]
        with pytest.raises(ValidationError, match="two models"):
            fusion.fuse_all(ps, "pair")

    def test_pair_strategy(self):
        ps = [pred(10, 1, "a"), pred(11, 1, "b")]
        assert fusion.fuse_all(ps, "pair")[0].value == 11.0
