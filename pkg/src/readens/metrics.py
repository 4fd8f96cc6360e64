"""Ordinal evaluation suite: QWK, collapsed accuracies, adjacent accuracy, distance."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, EmptyInputError, ValidationError
from .levels import CollapseMap, identity_map, load_collapse_maps

log = logging.getLogger(__name__)

NUM_LEVELS = 19


def _pairs(gold, pred, num_levels: int = NUM_LEVELS):
    gold = np.asarray(gold, dtype=np.int64).ravel()
    pred = np.asarray(pred, dtype=np.int64).ravel()
    if gold.shape != pred.shape:
        raise ValidationError(f"gold has {gold.size} labels but pred has {pred.size}")
    if gold.size == 0:
        raise EmptyInputError("no (gold, pred) pairs to evaluate")
    lo = min(gold.min(), pred.min())
    hi = max(gold.max(), pred.max())
    if lo < 1 or hi > num_levels:
        raise DomainError(f"labels must lie in [1, {num_levels}], found [{lo}, {hi}]")
    return gold, pred


def confusion_matrix(gold, pred, num_levels: int = NUM_LEVELS) -> np.ndarray:
    """``C[i, j]`` counts items with gold level ``i+1`` predicted as ``j+1``."""
    gold, pred = _pairs(gold, pred, num_levels)
    return _kernels.confusion_matrix(gold - 1, pred - 1, num_levels)


def qwk_from_confusion(conf) -> float:
    num, den = _kernels.quadratic_disagreement(conf)
    if den == 0.0:
        log.warning("QWK expected disagreement is zero (single shared level); returning 1.0")
        return 1.0
    return 1.0 - num / den


def qwk(gold, pred, num_levels: int = NUM_LEVELS) -> float:
    """Cohen's kappa with quadratic weights ``(i-j)^2 / (K-1)^2``.

    The expected matrix is the outer product of the gold and prediction
    marginals. When every item sits on one shared level the expected
    disagreement is zero and 1.0 is returned.
    """
    return qwk_from_confusion(confusion_matrix(gold, pred, num_levels))


def accuracy_at(gold, pred, cmap: CollapseMap | None = None) -> float:
    gold, pred = _pairs(gold, pred)
    if cmap is None:
        return float(np.mean(gold == pred))
    lut = np.zeros(NUM_LEVELS + 1, dtype=np.int64)
    for src, dst in cmap.mapping.items():
        lut[src] = dst
    return float(np.mean(lut[gold] == lut[pred]))


def adjacent_accuracy(gold, pred) -> float:
    gold, pred = _pairs(gold, pred)
    return float(np.mean(np.abs(gold - pred) <= 1))


def avg_distance(gold, pred) -> float:
    gold, pred = _pairs(gold, pred)
    return float(np.mean(np.abs(gold - pred)))


@dataclass(frozen=True)
class EvalReport:
    n: int
    qwk: float
    acc19: float
    acc7: float
    acc5: float
    acc3: float
    adj_acc: float
    avg_dist: float
    confusion: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["confusion"] = [list(row) for row in self.confusion]
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> EvalReport:
        fields = dict(data)
        fields["confusion"] = tuple(tuple(int(v) for v in row) for row in fields["confusion"])
        return cls(**fields)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> EvalReport:
        return cls.from_dict(json.loads(text))

    def summary(self) -> str:
        rows = [
            ("n", f"{self.n}"),
            ("QWK", f"{self.qwk:.4f}"),
            ("Acc19", f"{self.acc19:.4f}"),
            ("Acc7", f"{self.acc7:.4f}"),
            ("Acc5", f"{self.acc5:.4f}"),
            ("Acc3", f"{self.acc3:.4f}"),
            ("+-1 Acc19", f"{self.adj_acc:.4f}"),
            ("Dist", f"{self.avg_dist:.4f}"),
        ]
        return "\n".join(f"{k:<10} {v}" for k, v in rows)


def full_report(gold: Sequence[int], pred: Sequence[int],
                collapse_maps: Mapping[int, CollapseMap] | None = None) -> EvalReport:
    maps = dict(collapse_maps) if collapse_maps is not None else load_collapse_maps()
    missing = {7, 5, 3} - set(maps)
    if missing:
        raise ValidationError(f"collapse maps missing for granularities {sorted(missing)}")
    conf = confusion_matrix(gold, pred)
    return EvalReport(
        n=int(conf.sum()),
        qwk=qwk_from_confusion(conf),
        acc19=accuracy_at(gold, pred, identity_map()),
        acc7=accuracy_at(gold, pred, maps[7]),
        acc5=accuracy_at(gold, pred, maps[5]),
        acc3=accuracy_at(gold, pred, maps[3]),
        adj_acc=adjacent_accuracy(gold, pred),
        avg_dist=avg_distance(gold, pred),
        confusion=tuple(tuple(int(v) for v in row) for row in conf),
    )
