"""Record schema, file ingestion, deterministic splitting, and logit-to-score transforms."""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence


class ScoredExample(NamedTuple):
    """A (score, label) pair; higher score means more positive."""

    score: float
    label: int


@dataclass(frozen=True)
class LogitRecord:
    """One labeled example with the answer-token logits (natural-log scale).

    ``full_logits`` optionally carries the whole vocabulary logit vector, in
    which case ``pos_index``/``neg_index`` locate the answer tokens inside it.
    ``true_posterior`` is only populated by the synthetic generator.
    """

    id: str
    u_pos: float
    u_neg: float
    label: int
    full_logits: tuple[float, ...] | None = None
    pos_index: int | None = None
    neg_index: int | None = None
    true_posterior: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("record id must be a non-empty string")
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        for name in ("u_pos", "u_neg"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if self.full_logits is not None:
            object.__setattr__(self, "full_logits", tuple(float(u) for u in self.full_logits))
            k = len(self.full_logits)
            if self.pos_index is None or self.neg_index is None:
                raise ValueError("full_logits requires pos_index and neg_index")
            if self.pos_index == self.neg_index:
                raise ValueError("pos_index and neg_index must be distinct")
            for name in ("pos_index", "neg_index"):
                idx = getattr(self, name)
                if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < k:
                    raise ValueError(f"{name} must be an integer in [0, {k}), got {idx!r}")
            if any(not math.isfinite(u) for u in self.full_logits):
                raise ValueError("full_logits entries must be finite")
            if self.full_logits[self.pos_index] != self.u_pos:
                raise ValueError("full_logits[pos_index] must equal u_pos")
            if self.full_logits[self.neg_index] != self.u_neg:
                raise ValueError("full_logits[neg_index] must equal u_neg")
        elif self.pos_index is not None or self.neg_index is not None:
            raise ValueError("pos_index/neg_index are only valid alongside full_logits")
        if self.true_posterior is not None and not 0.0 <= self.true_posterior <= 1.0:
            raise ValueError(f"true_posterior must lie in [0, 1], got {self.true_posterior!r}")


@dataclass(frozen=True)
class SplitSpec:
    """Seeded calibration/test split; ``calibration_fraction`` in (0, 1)."""

    seed: int
    calibration_fraction: float

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not 0.0 < self.calibration_fraction < 1.0:
            raise ValueError(
                f"calibration_fraction must lie in (0, 1), got {self.calibration_fraction!r}"
            )


_REQUIRED_KEYS = ("id", "u_pos", "u_neg", "label")
_OPTIONAL_KEYS = ("full_logits", "pos_index", "neg_index", "true_posterior")


def _record_from_mapping(obj: dict, where: str) -> LogitRecord:
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise ValueError(f"{where}: missing required field {key!r}")
    kwargs = {key: obj[key] for key in _REQUIRED_KEYS}
    for key in _OPTIONAL_KEYS:
        if obj.get(key) is not None:
            kwargs[key] = obj[key]
    try:
        return LogitRecord(**kwargs)
    except ValueError as exc:
        raise ValueError(f"{where}: {exc}") from None


def read_records(path, format: str = "jsonl") -> list[LogitRecord]:
    """Read LogitRecords from a JSONL or CSV file, preserving file order.

    CSV files carry columns ``id,u_pos,u_neg,label`` and optionally
    ``true_posterior``; full logit vectors are only representable in JSONL.
    Malformed content raises ValueError naming the offending line.
    """
    if format == "jsonl":
        records = _read_jsonl(path)
    elif format == "csv":
        records = _read_csv(path)
    else:
        raise ValueError(f"unknown record format {format!r} (expected 'jsonl' or 'csv')")
    seen: set[str] = set()
    for rec in records:
        if rec.id in seen:
            raise ValueError(f"{path}: duplicate record id {rec.id!r}")
        seen.add(rec.id)
    return records


def _read_jsonl(path) -> list[LogitRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{where}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ValueError(f"{where}: expected a JSON object")
            records.append(_record_from_mapping(obj, where))
    return records


def _read_csv(path) -> list[LogitRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for key in ("id", "u_pos", "u_neg", "label"):
            if key not in fields:
                raise ValueError(f"{path}: missing required column {key!r}")
        for lineno, row in enumerate(reader, 2):
            where = f"{path}: line {lineno}"
            obj: dict = {"id": row["id"]}
            try:
                obj["u_pos"] = float(row["u_pos"])
                obj["u_neg"] = float(row["u_neg"])
                obj["label"] = int(row["label"])
            except (TypeError, ValueError):
                raise ValueError(f"{where}: malformed numeric field") from None
            if row.get("true_posterior"):
                obj["true_posterior"] = float(row["true_posterior"])
            records.append(_record_from_mapping(obj, where))
    return records


def record_to_dict(record: LogitRecord) -> dict:
    """JSON-ready mapping for one record; optional fields omitted when absent."""
    obj: dict = {
        "id": record.id,
        "u_pos": record.u_pos,
        "u_neg": record.u_neg,
        "label": record.label,
    }
    if record.full_logits is not None:
        obj["full_logits"] = list(record.full_logits)
        obj["pos_index"] = record.pos_index
        obj["neg_index"] = record.neg_index
    if record.true_posterior is not None:
        obj["true_posterior"] = record.true_posterior
    return obj


def write_records(records: Iterable[LogitRecord], path) -> None:
    """Write records as JSONL (one object per line, schema as read by read_records)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)))
            fh.write("\n")


def split(
    records: Sequence[LogitRecord], spec: SplitSpec
) -> tuple[list[LogitRecord], list[LogitRecord]]:
    """Deterministically partition records into (calibration, test).

    Records are first sorted by id (so the split is stable across input file
    orderings), then Fisher-Yates shuffled with a Mersenne Twister seeded by
    ``spec.seed``; the first ``floor(fraction * n)`` become the calibration set.
    """
    n = len(records)
    if n < 2:
        raise ValueError(f"need at least 2 records to split, got {n}")
    ids = {rec.id for rec in records}
    if len(ids) != n:
        raise ValueError("records must have unique ids")
    m = int(math.floor(spec.calibration_fraction * n))
    if m == 0 or m == n:
        raise ValueError(
            f"calibration_fraction {spec.calibration_fraction} yields an empty side "
            f"for n={n} (calibration size {m})"
        )
    ordered = sorted(records, key=lambda rec: rec.id)
    random.Random(spec.seed).shuffle(ordered)
    return ordered[:m], ordered[m:]


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def softmax2_score(u_pos: float, u_neg: float, tau: float) -> float:
    """Positive-class probability from the two answer-token logits alone."""
    return _logistic((u_pos - u_neg) / tau)


def softmaxk_score(full_logits: Sequence[float], pos_index: int, tau: float) -> float:
    """Positive token's component of the softmax over the full logit vector.

    Max-subtraction keeps the exponentials finite; the score is NOT
    renormalized against the negative token.
    """
    scaled = [u / tau for u in full_logits]
    top = max(scaled)
    exps = [math.exp(u - top) for u in scaled]
    return exps[pos_index] / sum(exps)


def transform_scores(
    records: Sequence[LogitRecord], kind: str, temperature: float
) -> list[ScoredExample]:
    """Map records to (score, label) pairs via the chosen softmax transform.

    ``kind`` is ``"softmax2"`` (two answer-token logits) or ``"softmaxK"``
    (full-vocabulary softmax; requires full_logits on every record). Order is
    preserved and labels are copied through.
    """
    if not (isinstance(temperature, (int, float)) and temperature > 0 and math.isfinite(temperature)):
        raise ValueError(f"temperature must be a positive finite number, got {temperature!r}")
    if kind == "softmax2":
        return [
            ScoredExample(softmax2_score(r.u_pos, r.u_neg, temperature), r.label) for r in records
        ]
    if kind == "softmaxK":
        for r in records:
            if r.full_logits is None:
                raise ValueError(f"record {r.id!r} lacks full_logits, required for softmaxK")
        return [
            ScoredExample(softmaxk_score(r.full_logits, r.pos_index, temperature), r.label)
            for r in records
        ]
    raise ValueError(f"unknown transform kind {kind!r} (expected 'softmax2' or 'softmaxK')")


def write_scores_csv(examples: Iterable[ScoredExample], path) -> None:
    """Write ``score,label`` CSV; scores rendered with 17 significant digits
    so that read_scores_csv recovers them bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("score,label\n")
        for ex in examples:
            fh.write(f"{ex.score:.17g},{ex.label}\n")


def read_scores_csv(path) -> list[ScoredExample]:
    """Inverse of write_scores_csv."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "score,label":
            raise ValueError(f"{path}: expected header 'score,label', got {header!r}")
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected two fields")
            try:
                score = float(parts[0])
                label = int(parts[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row") from None
            if not math.isfinite(score):
                raise ValueError(f"{path}: line {lineno}: score must be finite")
            if label not in (0, 1):
                raise ValueError(f"{path}: line {lineno}: label must be 0 or 1")
            examples.append(ScoredExample(score, label))
    return examples


def write_report(report, path) -> None:
    """Persist a MetricsReport (anything with to_dict()) as a JSON document."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
