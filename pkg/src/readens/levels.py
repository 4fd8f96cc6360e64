"""Ordinal level arithmetic: scales, class weights, label re-scaling, collapse maps."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError, DomainError, EmptyInputError, ParseError


@dataclass(frozen=True)
class LevelScale:
    name: str
    min_level: int
    max_level: int

    def __post_init__(self):
        if not self.min_level < self.max_level:
            raise ConfigurationError(
                f"degenerate scale {self.name!r}: min_level {self.min_level} "
                f">= max_level {self.max_level}"
            )

    @property
    def levels(self) -> range:
        return range(self.min_level, self.max_level + 1)

    @property
    def n_levels(self) -> int:
        return self.max_level - self.min_level + 1

    def __contains__(self, value) -> bool:
        return self.min_level <= value <= self.max_level

    def check(self, value, what: str = "level"):
        if not (self.min_level <= value <= self.max_level):
            raise DomainError(
                f"{what} {value} outside {self.name} range "
                f"[{self.min_level}, {self.max_level}]"
            )
        return value


BAREC = LevelScale("barec", 1, 19)
SAMER = LevelScale("samer", 3, 6)
SCALES = {"barec": BAREC, "samer": SAMER}


def get_scale(name: str) -> LevelScale:
    try:
        return SCALES[name.lower()]
    except KeyError:
        raise ConfigurationError(f"unknown scale {name!r}; choose from {sorted(SCALES)}") from None


def round_half_away(x: float) -> int:
    """Round to the nearest integer, ties away from zero (11.5 -> 12, -0.5 -> -1)."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


# ------------------------------------------------------------ class weights


@dataclass(frozen=True)
class ClassWeights:
    weights: dict[int, float]
    n_samples: int
    n_classes: int
    counts: dict[int, int]

    def __getitem__(self, level: int) -> float:
        return self.weights[level]

    def get(self, level: int, default: float = 0.0) -> float:
        return self.weights.get(level, default)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_classes": self.n_classes,
            "counts": {str(k): v for k, v in self.counts.items()},
            "weights": {str(k): v for k, v in self.weights.items()},
        }


def compute_class_weights(counts: Mapping[int, int]) -> ClassWeights:
    """Inverse-frequency weights ``n_samples / (n_classes * count_j)``.

    Only classes with a nonzero count take part; ``n_classes`` is the number
    of observed classes, so ``sum_j w_j * count_j == n_samples``.
    """
    present = {int(k): int(v) for k, v in sorted(counts.items()) if v}
    if any(v < 0 for v in present.values()):
        raise ValueError("class counts must be nonnegative")
    if not present:
        raise EmptyInputError("cannot weight an empty class distribution")
    n_samples = sum(present.values())
    n_classes = len(present)
    weights = {k: n_samples / (n_classes * v) for k, v in present.items()}
    return ClassWeights(weights, n_samples, n_classes, present)


def class_weights_from_labels(labels: Iterable[int]) -> ClassWeights:
    counts: dict[int, int] = {}
    for label in labels:
        counts[int(label)] = counts.get(int(label), 0) + 1
    return compute_class_weights(counts)


# ------------------------------------------------------------- re-scaling


def scale_label(x: float, src: LevelScale = SAMER, dst: LevelScale = BAREC) -> float:
    """Affine min-max map of ``x`` from ``src`` onto ``dst`` (reals in, reals out)."""
    src.check(x, "label")
    return (x - src.min_level) / (src.max_level - src.min_level) * (
        dst.max_level - dst.min_level
    ) + dst.min_level


def descale_label(y: float, dst: LevelScale = SAMER, src: LevelScale = BAREC) -> float:
    """Inverse of :func:`scale_label`: bring ``y`` on ``src`` back onto ``dst``."""
    src.check(y, "label")
    return (y - src.min_level) / (src.max_level - src.min_level) * (
        dst.max_level - dst.min_level
    ) + dst.min_level


@dataclass(frozen=True)
class RoundTripReport:
    n: int
    max_deviation: float
    margin: float
    passed: bool
    worst_label: float | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "max_deviation": self.max_deviation,
            "margin": self.margin,
            "passed": self.passed,
            "worst_label": self.worst_label,
        }


def verify_roundtrip(
    labels: Iterable[float],
    src: LevelScale = SAMER,
    dst: LevelScale = BAREC,
    margin: float = 0.5,
) -> RoundTripReport:
    """Scale each label to ``dst``, snap to an integer, scale back, measure drift.

    The check passes when the largest drift is within ``margin``.
    """
    worst = 0.0
    worst_label = None
    n = 0
    for x in labels:
        n += 1
        snapped = clamp(round_half_away(scale_label(x, src, dst)), dst.min_level, dst.max_level)
        dev = abs(descale_label(snapped, src, dst) - x)
        if dev > worst or worst_label is None:
            worst, worst_label = dev, x
    return RoundTripReport(n, worst, margin, worst <= margin, worst_label)


# ---------------------------------------------------------- collapse maps


@dataclass(frozen=True)
class CollapseMap:
    granularity: int
    mapping: dict[int, int] = field(repr=False)
    source: LevelScale = BAREC

    def __post_init__(self):
        missing = [lvl for lvl in self.source.levels if lvl not in self.mapping]
        if missing:
            raise ConfigurationError(f"collapse map {self.granularity}: no entry for levels {missing}")
        extra = sorted(set(self.mapping) - set(self.source.levels))
        if extra:
            raise ConfigurationError(f"collapse map {self.granularity}: unknown source levels {extra}")
        values = [self.mapping[lvl] for lvl in self.source.levels]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ConfigurationError(f"collapse map {self.granularity} is not order-preserving")
        if sorted(set(values)) != list(range(1, self.granularity + 1)):
            raise ConfigurationError(
                f"collapse map {self.granularity} must cover exactly 1..{self.granularity}"
            )

    def __call__(self, level: int) -> int:
        return self.mapping[level]

    def to_tsv(self) -> str:
        return "".join(f"{lvl}\t{self.mapping[lvl]}\n" for lvl in self.source.levels)


def identity_map(scale: LevelScale = BAREC) -> CollapseMap:
    return CollapseMap(scale.n_levels, {lvl: lvl - scale.min_level + 1 for lvl in scale.levels}, scale)


def contiguous_map(granularity: int, scale: LevelScale = BAREC) -> CollapseMap:
    """Equal-width bins of width ``ceil(n_levels / granularity)``; the last bins may be narrower."""
    width = -(-scale.n_levels // granularity)
    mapping = {lvl: (lvl - scale.min_level) // width + 1 for lvl in scale.levels}
    return CollapseMap(granularity, mapping, scale)


def collapse(level: int, cmap: CollapseMap) -> int:
    return cmap.mapping[level]


def parse_collapse_map(text: str, path=None, scale: LevelScale = BAREC) -> CollapseMap:
    mapping: dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError("expected 'source_level<TAB>coarse_level'", path, lineno)
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer entry {line!r}", path, lineno) from None
        if src in mapping:
            raise ParseError(f"duplicate source level {src}", path, lineno)
        mapping[src] = dst
    if not mapping:
        raise ConfigurationError(f"{path}: empty collapse map")
    try:
        return CollapseMap(max(mapping.values()), mapping, scale)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def load_collapse_map(path) -> CollapseMap:
    path = Path(path)
    return parse_collapse_map(path.read_text(encoding="utf-8"), path)


def load_collapse_maps(directory=None) -> dict[int, CollapseMap]:
    """Load every ``*.tsv`` map in ``directory`` keyed by granularity.

    With no directory the packaged default maps (19 -> 7, 5, 3) are used.
    Granularities missing from a user directory fall back to the defaults.
    """
    maps = {}
    pkg = resources.files("readens") / "data" / "collapse"
    for entry in sorted(pkg.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".tsv"):
            cmap = parse_collapse_map(entry.read_text(encoding="utf-8"), entry.name)
            maps[cmap.granularity] = cmap
    if directory is not None:
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigurationError(f"collapse-map directory {directory} does not exist")
        for path in sorted(directory.glob("*.tsv")):
            cmap = load_collapse_map(path)
            maps[cmap.granularity] = cmap
    return maps
