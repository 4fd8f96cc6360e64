"""Gold labels, model head outputs, text cleaning and document keys.

File formats
------------
Gold TSV: ``id<TAB>text<TAB>label`` (``id<TAB>label`` is also accepted).
An optional header line ``id<TAB>text<TAB>label`` is skipped.

Head JSONL: one object per line with ``id``, ``model``, ``kind`` and exactly
one payload: ``probs`` (19 reals, classification), ``score`` (real,
regression) or ``thresholds`` (18 reals, ordinal).

Prediction TSV: first column is the item id, last column the integer level.
Gold files therefore double as prediction files.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, ValidationError
from .levels import BAREC, LevelScale

DOC_KEY_LENGTH = 7
KINDS = ("classification", "regression", "ordinal")
PAYLOAD_KEY = {"classification": "probs", "regression": "score", "ordinal": "thresholds"}
N_LEVELS = BAREC.n_levels
PROB_TOLERANCE = 1e-6
# below this the probabilities are left as-is, so serialise->parse is exact
_RENORM_EPS = 1e-12


@dataclass(frozen=True)
class GoldRecord:
    sentence_id: str
    level: int
    text: str = ""


@dataclass(frozen=True)
class HeadOutput:
    sentence_id: str
    model_id: str
    head_kind: str
    class_probs: tuple[float, ...] | None = None
    score: float | None = None
    threshold_probs: tuple[float, ...] | None = None

    def to_json(self) -> dict:
        out = {"id": self.sentence_id, "model": self.model_id, "kind": self.head_kind}
        if self.head_kind == "classification":
            out["probs"] = list(self.class_probs)
        elif self.head_kind == "regression":
            out["score"] = self.score
        else:
            out["thresholds"] = list(self.threshold_probs)
        return out


def validate_head(obj: dict, where: str = "") -> HeadOutput:
    """Build a :class:`HeadOutput` from a decoded JSON object, enforcing kind invariants."""
    prefix = f"{where}: " if where else ""
    if not isinstance(obj, dict):
        raise ValidationError(f"{prefix}expected a JSON object")
    for key in ("id", "model", "kind"):
        if not isinstance(obj.get(key), str) or not obj[key]:
            raise ValidationError(f"{prefix}missing or empty string field {key!r}")
    kind = obj["kind"]
    if kind not in KINDS:
        raise ValidationError(f"{prefix}unknown kind {kind!r}; expected one of {KINDS}")
    present = [k for k in PAYLOAD_KEY.values() if k in obj]
    if present != [PAYLOAD_KEY[kind]]:
        raise ValidationError(
            f"{prefix}kind {kind!r} needs exactly the {PAYLOAD_KEY[kind]!r} payload, got {present}"
        )
    sid, model = obj["id"], obj["model"]

    if kind == "regression":
        score = _finite(obj["score"], prefix + "score")
        return HeadOutput(sid, model, kind, score=score)

    vec = obj[PAYLOAD_KEY[kind]]
    expected = N_LEVELS if kind == "classification" else N_LEVELS - 1
    if not isinstance(vec, list) or len(vec) != expected:
        got = len(vec) if isinstance(vec, list) else type(vec).__name__
        raise ValidationError(f"{prefix}{kind} vector must have length {expected}, got {got}")
    vals = [_finite(v, f"{prefix}{PAYLOAD_KEY[kind]}[{i}]") for i, v in enumerate(vec)]

    if kind == "classification":
        if any(v < 0 for v in vals):
            raise ValidationError(f"{prefix}negative class probability")
        total = math.fsum(vals)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise ValidationError(f"{prefix}class probabilities sum to {total:.9g}, not 1")
        if abs(total - 1.0) > _RENORM_EPS:
            vals = [v / total for v in vals]
        return HeadOutput(sid, model, kind, class_probs=tuple(vals))

    if any(v < 0.0 or v > 1.0 for v in vals):
        raise ValidationError(f"{prefix}threshold probabilities must lie in [0, 1]")
    return HeadOutput(sid, model, kind, threshold_probs=tuple(vals))


def _finite(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{what} is not a number: {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{what} is not finite: {value!r}")
    return value


def _reject_constant(token):
    raise ValueError(f"non-finite literal {token}")


def parse_head_line(line: str) -> HeadOutput:
    return validate_head(json.loads(line, parse_constant=_reject_constant))


def load_heads(path) -> list[HeadOutput]:
    path = Path(path)
    heads: list[HeadOutput] = []
    seen: set[tuple[str, str]] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line, parse_constant=_reject_constant)
                head = validate_head(obj)
            except (ValueError, ValidationError) as exc:
                raise ParseError(str(exc), path, lineno) from None
            key = (head.sentence_id, head.model_id)
            if key in seen:
                raise ParseError(f"duplicate output for id {key[0]!r}, model {key[1]!r}", path, lineno)
            seen.add(key)
            heads.append(head)
    return heads


def dump_heads(heads: Iterable[HeadOutput], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for head in heads:
            fh.write(json.dumps(head.to_json(), ensure_ascii=False, allow_nan=False) + "\n")


# -------------------------------------------------------------------- gold


def _parse_level(field: str, scale: LevelScale, path, lineno: int) -> int:
    try:
        level = int(field.strip())
    except ValueError:
        raise ParseError(f"label {field!r} is not an integer", path, lineno) from None
    if level not in scale:
        raise ValidationError(
            f"{path}:{lineno}: label {level} outside {scale.name} range "
            f"[{scale.min_level}, {scale.max_level}]"
        )
    return level


def load_gold(path, scale: LevelScale = BAREC) -> list[GoldRecord]:
    path = Path(path)
    records: list[GoldRecord] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if lineno == 1 and parts[0] == "id" and parts[-1] == "label":
                continue
            if len(parts) < 2:
                raise ParseError("expected 'id<TAB>text<TAB>label'", path, lineno)
            sid = parts[0].strip()
            if not sid:
                raise ParseError("empty sentence id", path, lineno)
            if sid in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate sentence id {sid!r} (first seen on line {seen[sid]})"
                )
            seen[sid] = lineno
            level = _parse_level(parts[-1], scale, path, lineno)
            records.append(GoldRecord(sid, level, "\t".join(parts[1:-1])))
    return records


def write_gold(records: Iterable[GoldRecord], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(f"{rec.sentence_id}\t{rec.text}\t{rec.level}\n")


def load_levels(path, scale: LevelScale = BAREC) -> dict[str, int]:
    """Read any TSV whose first column is an id and last column an integer level."""
    return {rec.sentence_id: rec.level for rec in load_gold(path, scale)}


# --------------------------------------------------------- doc keys / text


def doc_key(sentence_id: str) -> str:
    if len(sentence_id) < DOC_KEY_LENGTH:
        raise ValidationError(
            f"malformed sentence id {sentence_id!r}: shorter than {DOC_KEY_LENGTH} characters"
        )
    return sentence_id[:DOC_KEY_LENGTH]


def group_by_doc(sentence_ids: Iterable[str]) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for sid in sentence_ids:
        groups.setdefault(doc_key(sid), []).append(sid)
    return groups


_REPEAT = re.compile(r"([^\w\s])\1+")
_SPACE = re.compile(r"\s+")


def _squeeze_punct(match: re.Match) -> str:
    ch = match.group(1)
    return ch if unicodedata.category(ch).startswith("P") else match.group(0)


def normalize_text(raw: str) -> str:
    """NFC-normalise, squeeze runs of one punctuation mark, collapse whitespace, strip.

    Mixed punctuation runs such as ``?!`` are kept; digits and letter
    variants are not touched.
    """
    text = unicodedata.normalize("NFC", raw)
    text = _REPEAT.sub(_squeeze_punct, text)
    text = _SPACE.sub(" ", text).strip()
    return unicodedata.normalize("NFC", text)
