import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_qwk
from readens import metrics
from readens.errors import DomainError, EmptyInputError
from readens.levels import CollapseMap, contiguous_map, identity_map

levels19 = st.integers(1, 19)
pair_lists = st.integers(1, 60).flatmap(
    lambda n: st.tuples(st.lists(levels19, min_size=n, max_size=n),
                        st.lists(levels19, min_size=n, max_size=n)))


class TestQWK:
    def test_perfect(self):
        assert metrics.qwk([1, 5, 19, 7], [1, 5, 19, 7]) == 1.0

    def test_reversed_four(self):
        # frozen from brute_force_qwk
        assert metrics.qwk([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_reversed_extremes_negative(self):
        gold, pred = [1, 19, 1, 19, 1, 19], [19, 1, 19, 1, 19, 1]
        k = metrics.qwk(gold, pred)
        assert k < 0
        assert k == pytest.approx(brute_force_qwk(gold, pred), abs=1e-12)

    def test_constant_prediction(self):
        gold = [1, 3, 5, 7, 9, 12, 12, 12, 15, 19]
        assert metrics.qwk(gold, [12] * 10) == pytest.approx(0.0, abs=1e-12)

    def test_single_shared_level(self, caplog):
        assert metrics.qwk([7, 7, 7], [7, 7, 7]) == 1.0

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            metrics.qwk([], [])
        with pytest.raises(DomainError):
            metrics.qwk([0, 3], [1, 3])
        with pytest.raises(DomainError):
            metrics.qwk([20], [1])

    @given(pair_lists)
    def test_matches_oracle(self, gp):
        gold, pred = gp
        assert metrics.qwk(gold, pred) == pytest.approx(brute_force_qwk(gold, pred), abs=1e-12)

    @given(pair_lists)
    def test_symmetric(self, gp):
        gold, pred = gp
        assert metrics.qwk(gold, pred) == pytest.approx(metrics.qwk(pred, gold), abs=1e-12)

    @given(pair_lists)
    def test_reflection_invariant(self, gp):
        gold, pred = gp
        flip = lambda xs: [20 - v for v in xs]  # noqa: E731
        assert metrics.qwk(flip(gold), flip(pred)) == pytest.approx(metrics.qwk(gold, pred), abs=1e-12)

    @given(pair_lists)
    def test_bounds(self, gp):
        assert -1 - 1e-12 <= metrics.qwk(*gp) <= 1


class TestAccuracies:
    def test_identity_all_equal(self):
        assert metrics.accuracy_at([3, 4], [3, 4], identity_map()) == 1.0

    @pytest.mark.parametrize("g", [7, 5, 3])
    def test_endpoints_split(self, g):
        assert metrics.accuracy_at([1, 19], [19, 1], contiguous_map(g)) == 0.0

    def test_same_bin(self):
        assert metrics.accuracy_at([1, 2], [2, 1], contiguous_map(3)) == 1.0

    def test_adjacent(self):
        assert metrics.adjacent_accuracy([1, 2, 3], [2, 2, 2]) == 1.0
        assert metrics.adjacent_accuracy([1], [3]) == 0.0
        assert metrics.adjacent_accuracy([5, 5, 5, 5], [4, 5, 6, 8]) == 0.75

    def test_distance(self):
        assert metrics.avg_distance([4, 9], [4, 9]) == 0.0
        assert metrics.avg_distance([1, 4], [3, 4]) == 1.0
        assert metrics.avg_distance([1], [19]) == 18.0

    @pytest.mark.parametrize("fn", [metrics.adjacent_accuracy, metrics.avg_distance, metrics.accuracy_at])
    def test_empty(self, fn):
        with pytest.raises(EmptyInputError):
            fn([], [])

    @given(pair_lists)
    def test_nested_ordering(self, gp):
        gold, pred = gp
        # each coarser map merges whole bins of the finer one
        m7 = contiguous_map(7)
        m5 = CollapseMap(5, {v: (1, 1, 2, 2, 3, 4, 5)[m7(v) - 1] for v in range(1, 20)})
        m3 = CollapseMap(3, {v: (1, 1, 2, 3, 3)[m5(v) - 1] for v in range(1, 20)})
        a19 = metrics.accuracy_at(gold, pred)
        a7 = metrics.accuracy_at(gold, pred, m7)
        a5 = metrics.accuracy_at(gold, pred, m5)
        a3 = metrics.accuracy_at(gold, pred, m3)
        adj = metrics.adjacent_accuracy(gold, pred)
        assert a19 <= a7 <= a5 <= a3
        assert a19 <= adj
        assert (metrics.avg_distance(gold, pred) == 0) == (a19 == 1.0)


class TestReport:
    def test_perfect(self):
        rep = metrics.full_report([1, 5, 12, 19], [1, 5, 12, 19])
        assert rep.qwk == 1.0 and rep.avg_dist == 0.0
        assert rep.acc19 == rep.acc7 == rep.acc5 == rep.acc3 == rep.adj_acc == 1.0

    def test_constant_prediction(self):
        gold = [1, 3, 5, 7, 9, 12, 12, 12, 15, 19]
        rep = metrics.full_report(gold, [12] * 10)
        assert rep.acc19 == 0.3
        assert rep.qwk == pytest.approx(brute_force_qwk(gold, [12] * 10), abs=1e-12)

    def test_confusion_consistent(self):
        gold, pred = [1, 2, 2, 19], [1, 3, 2, 18]
        rep = metrics.full_report(gold, pred)
        conf = np.array(rep.confusion)
        assert conf.shape == (19, 19) and conf.sum() == rep.n == 4
        assert conf[1, 2] == 1 and conf[18, 17] == 1
        assert list(conf.sum(axis=1)) == [np.sum(np.array(gold) == v) for v in range(1, 20)]

    def test_json_roundtrip(self):
        rep = metrics.full_report([1, 4, 9, 12, 12], [2, 4, 10, 12, 14])
        assert metrics.EvalReport.from_json(rep.to_json()) == rep

    def test_summary_four_decimals(self):
        rep = metrics.full_report([1, 4, 9], [2, 4, 10])
        assert "QWK        0." in rep.summary()
        assert all(len(line.split()[-1].split(".")[-1]) == 4
                   for line in rep.summary().splitlines()[1:])
