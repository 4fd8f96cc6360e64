"""Document-level aggregation, the 16/17 override, and prediction-skew diagnostics."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .errors import ConfigurationError, EmptyInputError
from .levels import BAREC, clamp, round_half_away
from .records import doc_key

LO, HI = BAREC.min_level, BAREC.max_level
STRATEGIES = ("max", "mean_ceil", "mean_floor_borderline")
_CLI_NAMES = {"max": "max", "mean-ceil": "mean_ceil", "mean-floor": "mean_floor_borderline"}


@dataclass(frozen=True)
class AggregationPolicy:
    strategy: str = "max"
    borderline_threshold: float = 0.5
    override_levels: frozenset[int] = field(default_factory=lambda: frozenset({16, 17}))

    def __post_init__(self):
        strategy = _CLI_NAMES.get(self.strategy, self.strategy)
        if strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown aggregation strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", strategy)
        if not 0.0 <= self.borderline_threshold <= 1.0:
            raise ConfigurationError("borderline threshold must lie in [0, 1]")
        levels = frozenset(int(v) for v in self.override_levels)
        if any(v < LO or v > HI for v in levels):
            raise ConfigurationError(f"override levels must lie in [{LO}, {HI}]")
        object.__setattr__(self, "override_levels", levels)


@dataclass(frozen=True)
class DocPrediction:
    doc_id: str
    level: int
    member_levels: tuple[int, ...]


def aggregate_max(members: Sequence[int]) -> int:
    if not members:
        raise EmptyInputError("document has no sentences")
    return max(members)


def aggregate_mean(members: Sequence[float], policy: AggregationPolicy) -> int:
    """Mean of the member scores, rounded up (``mean_ceil``) or, for the
    borderline variant, rounded down when the fractional part is at most
    the policy threshold.
    """
    if not members:
        raise EmptyInputError("document has no sentences")
    m = math.fsum(sorted(members)) / len(members)
    if policy.strategy == "mean_ceil":
        level = math.ceil(m)
    elif policy.strategy == "mean_floor_borderline":
        low = math.floor(m)
        level = low if m - low <= policy.borderline_threshold else math.ceil(m)
    else:
        raise ConfigurationError(f"aggregate_mean cannot apply strategy {policy.strategy!r}")
    return clamp(int(level), LO, HI)


def aggregate(members: Sequence[float], policy: AggregationPolicy) -> int:
    if policy.strategy == "max":
        return aggregate_max([int(v) for v in members])
    return aggregate_mean(members, policy)


def apply_override(doc_level: int, all_model_doc_levels: Iterable[int],
                   policy: AggregationPolicy | None = None) -> int:
    """Raise ``doc_level`` to the highest per-model level that is an override level above it."""
    policy = policy or AggregationPolicy()
    higher = [v for v in all_model_doc_levels if v in policy.override_levels and v > doc_level]
    return max(higher) if higher else doc_level


def aggregate_documents(
    sentence_values: Mapping[str, float],
    policy: AggregationPolicy,
    sentence_levels: Mapping[str, int] | None = None,
    per_model: Mapping[str, Mapping[str, float]] | None = None,
    override: bool = True,
) -> list[DocPrediction]:
    """Group sentences by document key and aggregate.

    ``sentence_values`` carries the real-valued fused score used by the mean
    strategies; ``sentence_levels`` the integer level used by ``max`` and
    stored as members (rounded from the values when omitted). ``per_model``
    maps model id to that model's per-sentence values; each model is
    aggregated under the same policy and the override is applied against
    those document levels.
    """
    if sentence_levels is None:
        sentence_levels = {
            sid: clamp(round_half_away(v), LO, HI) for sid, v in sentence_values.items()
        }
    groups: dict[str, list[str]] = {}
    for sid in sorted(sentence_values):
        groups.setdefault(doc_key(sid), []).append(sid)

    model_docs: dict[str, dict[str, int]] = {}
    if per_model and override:
        for model, values in sorted(per_model.items()):
            mgroups: dict[str, list[float]] = {}
            for sid in sorted(values):
                mgroups.setdefault(doc_key(sid), []).append(values[sid])
            model_docs[model] = {d: aggregate(v, policy) for d, v in mgroups.items()}

    out = []
    for doc, sids in sorted(groups.items()):
        members = tuple(sentence_levels[s] for s in sids)
        if policy.strategy == "max":
            level = aggregate_max(members)
        else:
            level = aggregate_mean([sentence_values[s] for s in sids], policy)
        if model_docs:
            level = apply_override(level, [m[doc] for m in model_docs.values() if doc in m], policy)
        out.append(DocPrediction(doc, level, members))
    return out


@dataclass(frozen=True)
class SkewReport:
    counts: dict[int, int]
    n: int
    zero_coverage: list[int]
    over_represented: list[int]
    multiple: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "counts": {str(k): v for k, v in self.counts.items()},
            "zero_coverage": self.zero_coverage,
            "over_represented": self.over_represented,
            "over_representation_multiple": self.multiple,
        }


def skew_report(doc_preds: Iterable, multiple: float = 3.0) -> SkewReport:
    """Per-level histogram with empty and over-represented levels flagged.

    Accepts :class:`DocPrediction` objects or bare integer levels. A level is
    over-represented when its share exceeds ``multiple`` times the uniform
    share ``1/19``.
    """
    counts = {lvl: 0 for lvl in BAREC.levels}
    n = 0
    for p in doc_preds:
        level = p.level if isinstance(p, DocPrediction) else int(p)
        counts[level] += 1
        n += 1
    if n == 0:
        raise EmptyInputError("skew report needs at least one prediction")
    cutoff = multiple * n / BAREC.n_levels
    return SkewReport(
        counts,
        n,
        [lvl for lvl, c in counts.items() if c == 0],
        [lvl for lvl, c in counts.items() if c > cutoff],
        multiple,
    )
