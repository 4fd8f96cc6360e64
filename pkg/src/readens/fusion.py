"""Sentence-level ensembling: confidence-weighted mean and the two-model borderline rule."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .decode import DecodedPrediction
from .errors import EmptyInputError, ValidationError
from .levels import BAREC, clamp, round_half_away

log = logging.getLogger(__name__)

LO, HI = BAREC.min_level, BAREC.max_level


@dataclass(frozen=True)
class FusedPrediction:
    sentence_id: str
    value: float
    level: int
    contributors: tuple[tuple[str, float, float], ...]  # (model_id, p_i, c_i)


def to_level(value: float) -> int:
    return clamp(round_half_away(value), LO, HI)


def _check_group(preds: Sequence[DecodedPrediction]) -> list[DecodedPrediction]:
    if not preds:
        raise EmptyInputError("cannot fuse an empty prediction list")
    ids = {p.sentence_id for p in preds}
    if len(ids) != 1:
        raise ValidationError(f"fusing predictions of different sentences: {sorted(ids)}")
    # fixed summation order regardless of input order
    return sorted(preds, key=lambda p: (p.model_id, p.raw_score, p.level, p.confidence))


def fuse_weighted(preds: Sequence[DecodedPrediction], use_raw: bool = False) -> FusedPrediction:
    """``sum(p_i * c_i) / sum(c_i)`` with ``p_i`` the raw score or the integer level."""
    preds = _check_group(preds)
    if any(p.confidence < 0 or not math.isfinite(p.confidence) for p in preds):
        raise ValidationError(f"{preds[0].sentence_id}: confidences must be finite and nonnegative")
    values = [p.raw_score if use_raw else float(p.level) for p in preds]
    total = math.fsum(p.confidence for p in preds)
    if total <= 0:
        raise ValidationError(f"{preds[0].sentence_id}: all confidences are zero")
    value = math.fsum(v * p.confidence for v, p in zip(values, preds)) / total
    # guard against last-ulp excursions beyond the convex hull
    value = clamp(value, min(values), max(values))
    contributors = tuple((p.model_id, v, p.confidence) for v, p in zip(values, preds))
    return FusedPrediction(preds[0].sentence_id, value, to_level(value), contributors)


def fuse_pair(p1: int, p2: int) -> float:
    """Higher of the two when they differ by exactly one level, otherwise their mean."""
    if abs(p1 - p2) == 1:
        return float(max(p1, p2))
    return (p1 + p2) / 2


def fuse_pair_predictions(preds: Sequence[DecodedPrediction]) -> FusedPrediction:
    preds = _check_group(preds)
    if len(preds) > 2:
        raise ValidationError(f"{preds[0].sentence_id}: pair rule takes at most two predictions")
    if len(preds) == 1:
        value = float(preds[0].level)
    else:
        value = fuse_pair(preds[0].level, preds[1].level)
    contributors = tuple((p.model_id, float(p.level), p.confidence) for p in preds)
    return FusedPrediction(preds[0].sentence_id, value, to_level(value), contributors)


def fusion_confidence_scale_invariance_check(preds, k: float, use_raw: bool = False,
                                             tol: float = 1e-9) -> bool:
    if k <= 0:
        raise ValueError("k must be positive")
    base = fuse_weighted(preds, use_raw).value
    scaled = [
        DecodedPrediction(p.sentence_id, p.model_id, p.level, p.raw_score, p.confidence * k, p.kind)
        for p in preds
    ]
    return abs(fuse_weighted(scaled, use_raw).value - base) <= tol * max(1.0, abs(base))


def fuse_all(preds: Iterable[DecodedPrediction], strategy: str = "weighted",
             use_raw: bool = False, models: Sequence[str] | None = None) -> list[FusedPrediction]:
    """Group by sentence and fuse; sentences missing some models are fused from the rest."""
    groups: dict[str, list[DecodedPrediction]] = {}
    for p in preds:
        groups.setdefault(p.sentence_id, []).append(p)
    expected = set(models) if models is not None else {p.model_id for g in groups.values() for p in g}
    if strategy == "pair" and len(expected) != 2:
        raise ValidationError(f"pair strategy needs exactly two models, got {sorted(expected)}")
    out = []
    for sid in sorted(groups):
        group = groups[sid]
        seen = [p.model_id for p in group]
        if len(set(seen)) != len(seen):
            raise ValidationError(f"{sid}: duplicate predictions from one model")
        missing = expected - set(seen)
        if missing:
            log.warning("%s: no prediction from %s; fusing the remaining models", sid, sorted(missing))
        if strategy == "weighted":
            out.append(fuse_weighted(group, use_raw))
        elif strategy == "pair":
            out.append(fuse_pair_predictions(group))
        else:
            raise ValidationError(f"unknown fusion strategy {strategy!r}")
    return out
