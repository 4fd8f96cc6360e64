"""Turn raw head outputs into (score, level, confidence) triples."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, ValidationError
from .levels import BAREC, clamp, round_half_away
from .records import HeadOutput

LO, HI = BAREC.min_level, BAREC.max_level
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class DecodedPrediction:
    sentence_id: str
    model_id: str
    level: int
    raw_score: float
    confidence: float
    kind: str = ""


@dataclass(frozen=True)
class CalibrationStats:
    model_id: str
    residual_variance: float
    epsilon: float = DEFAULT_EPSILON
    n: int = 0

    @property
    def confidence(self) -> float:
        return 1.0 / (self.residual_variance + self.epsilon)


def decode_classification(h: HeadOutput) -> DecodedPrediction:
    probs = h.class_probs
    # first maximum wins, i.e. ties go to the lower level
    best = max(range(len(probs)), key=probs.__getitem__)
    level = best + 1
    return DecodedPrediction(h.sentence_id, h.model_id, level, float(level), probs[best], h.head_kind)


def decode_regression(h: HeadOutput, cal: CalibrationStats | Mapping[str, CalibrationStats]) -> DecodedPrediction:
    if not isinstance(cal, CalibrationStats):
        try:
            cal = cal[h.model_id]
        except KeyError:
            raise ConfigurationError(f"no regression calibration for model {h.model_id!r}") from None
    raw = clamp(float(h.score), float(LO), float(HI))
    level = clamp(round_half_away(raw), LO, HI)
    return DecodedPrediction(h.sentence_id, h.model_id, level, raw, cal.confidence, h.head_kind)


def decode_ordinal(h: HeadOutput) -> DecodedPrediction:
    p = h.threshold_probs
    level = 1 + sum(1 for v in p if v > 0.5)
    raw = 1.0 + math.fsum(p)
    confidence = math.fsum(abs(2.0 * v - 1.0) for v in p) / len(p)
    return DecodedPrediction(h.sentence_id, h.model_id, level, raw, confidence, h.head_kind)


def decode(h: HeadOutput, calibration: Mapping[str, CalibrationStats] | None = None) -> DecodedPrediction:
    if h.head_kind == "classification":
        return decode_classification(h)
    if h.head_kind == "ordinal":
        return decode_ordinal(h)
    if h.head_kind == "regression":
        return decode_regression(h, calibration or {})
    raise ValidationError(f"unknown head kind {h.head_kind!r}")


def decode_all(heads: Iterable[HeadOutput], calibration=None) -> list[DecodedPrediction]:
    return [decode(h, calibration) for h in heads]


def calibrate_regression(pairs, model_id: str = "", epsilon: float = DEFAULT_EPSILON) -> CalibrationStats:
    """Population variance of ``score - gold`` over a held-out split."""
    arr = np.asarray(list(pairs), dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] < 2:
        raise InsufficientDataError(
            f"regression calibration for {model_id!r} needs at least 2 pairs, got {arr.shape[0]}"
        )
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    residuals = arr[:, 0] - arr[:, 1]
    return CalibrationStats(model_id, float(np.var(residuals)), epsilon, int(arr.shape[0]))


def fit_calibration(heads: Iterable[HeadOutput], gold: Mapping[str, int],
                    epsilon: float = DEFAULT_EPSILON) -> dict[str, CalibrationStats]:
    """Calibrate every regression model in ``heads`` against ``gold`` levels."""
    by_model: dict[str, list[tuple[float, int]]] = {}
    for h in heads:
        if h.head_kind == "regression" and h.sentence_id in gold:
            by_model.setdefault(h.model_id, []).append((h.score, gold[h.sentence_id]))
    return {m: calibrate_regression(pairs, m, epsilon) for m, pairs in sorted(by_model.items())}


def save_calibration(stats: Mapping[str, CalibrationStats], path) -> None:
    table = {
        m: {"residual_variance": s.residual_variance, "epsilon": s.epsilon, "n": s.n}
        for m, s in sorted(stats.items())
    }
    Path(path).write_text(json.dumps(table, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_calibration(path) -> dict[str, CalibrationStats]:
    try:
        table = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid calibration JSON ({exc})") from None
    out = {}
    for model, row in table.items():
        try:
            var = float(row["residual_variance"])
            eps = float(row.get("epsilon", DEFAULT_EPSILON))
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{path}: bad calibration entry for {model!r}") from None
        if var < 0 or eps <= 0 or not math.isfinite(var):
            raise ValidationError(f"{path}: invalid variance/epsilon for {model!r}")
        out[model] = CalibrationStats(model, var, eps, int(row.get("n", 0)))
    return out
