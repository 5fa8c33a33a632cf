"""Aggregation of listening-test ratings and externally computed quality scores."""

from __future__ import annotations

import csv
import io
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from lfcov.errors import LfcovError

IR_COLUMNS = ("utterance_id", "bigram", "rater_id", "label")
MOS_COLUMNS = ("utterance_id", "rater_id", "score")
QUALITY_COLUMNS = ("utterance_id", "s_sim", "snr", "c50")
QUALITY_METRICS = ("s_sim", "snr", "c50")


@dataclass(frozen=True)
class IntelligibilityRating:
    utterance_id: str
    bigram: str
    rater_id: str
    label: int
    playback_speed: float | None = None  # recorded only, never aggregated

    def __post_init__(self):
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise LfcovError(f"intelligibility label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class MosRating:
    utterance_id: str
    rater_id: str
    score: int

    def __post_init__(self):
        if isinstance(self.score, bool) or self.score not in (1, 2, 3, 4, 5):
            raise LfcovError(f"MOS score must be an integer in [1, 5], got {self.score!r}")


@dataclass(frozen=True)
class QualityRow:
    utterance_id: str
    s_sim: float | None = None
    snr: float | None = None
    c50: float | None = None

    def __post_init__(self):
        if self.s_sim is not None and not -1.0 <= self.s_sim <= 1.0:
            raise LfcovError(f"{self.utterance_id}: s_sim {self.s_sim} outside [-1, 1]")


@dataclass(frozen=True)
class IntelligibilityResult:
    pooled: Fraction
    per_rater: dict
    agreement: Fraction | None  # None when no item was seen by two or more raters
    n: int
    n_items: int
    rater_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pooled": float(self.pooled),
            "per_rater": {k: float(v) for k, v in self.per_rater.items()},
            "rater_counts": dict(self.rater_counts),
            "agreement": None if self.agreement is None else float(self.agreement),
            "n": self.n,
            "n_items": self.n_items,
        }


@dataclass(frozen=True)
class MosResult:
    mean: float
    ci95_halfwidth: float
    n: int
    ci_method: str = "normal-approximation"

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci95_halfwidth": self.ci95_halfwidth, "n": self.n, "ci_method": self.ci_method}


def intelligibility_rate(ratings: Sequence[IntelligibilityRating]) -> IntelligibilityResult:
    """Pooled and per-rater share of positive labels, plus full-agreement rate.

    Agreement counts only (utterance, bigram) items judged by at least two
    raters.
    """
    if not ratings:
        raise LfcovError("no intelligibility ratings")
    seen = set()
    by_rater = defaultdict(list)
    by_item = defaultdict(list)
    for r in ratings:
        key = (r.utterance_id, r.bigram, r.rater_id)
        if key in seen:
            raise LfcovError(f"duplicate rating for utterance {r.utterance_id!r}, bigram {r.bigram!r}, rater {r.rater_id!r}")
        seen.add(key)
        by_rater[r.rater_id].append(r.label)
        by_item[(r.utterance_id, r.bigram)].append(r.label)
    pooled = Fraction(sum(r.label for r in ratings), len(ratings))
    per_rater = {k: Fraction(sum(v), len(v)) for k, v in sorted(by_rater.items())}
    multi = [labels for labels in by_item.values() if len(labels) > 1]
    agreement = None
    if multi:
        agreement = Fraction(sum(1 for labels in multi if len(set(labels)) == 1), len(multi))
    counts = {k: len(v) for k, v in sorted(by_rater.items())}
    return IntelligibilityResult(pooled, per_rater, agreement, len(ratings), len(by_item), counts)


def mos(ratings: Sequence[MosRating]) -> MosResult:
    if not ratings:
        raise LfcovError("no MOS ratings")
    scores = [r.score for r in ratings]
    n = len(scores)
    mean = Fraction(sum(scores), n)
    half = 0.0 if n == 1 else 1.96 * statistics.stdev(scores) / math.sqrt(n)
    return MosResult(float(mean), half, n)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0:
        raise LfcovError("cosine similarity needs two non-empty 1-D vectors")
    if a.shape != b.shape:
        raise LfcovError(f"dimension mismatch: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise LfcovError("cosine similarity is undefined for a zero vector")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


@dataclass(frozen=True)
class MethodQuality:
    method: str
    means: dict  # metric -> mean or None
    counts: dict  # metric -> n

    def to_dict(self) -> dict:
        return {"method": self.method, "means": self.means, "counts": self.counts}


def quality_summary(
    rows: Sequence[QualityRow],
    grouping: Mapping[str, str],
    methods: Sequence[str] | None = None,
) -> list[MethodQuality]:
    """Per-method mean of each metric, skipping missing cells.

    Methods come out in ``methods`` order if given, else in order of first
    appearance in ``grouping``.
    """
    buckets: dict[str, dict[str, list]] = {}
    for row in rows:
        if row.utterance_id not in grouping:
            raise LfcovError(f"utterance {row.utterance_id!r} is not mapped to a method")
        method = grouping[row.utterance_id]
        bucket = buckets.setdefault(method, {m: [] for m in QUALITY_METRICS})
        for metric in QUALITY_METRICS:
            value = getattr(row, metric)
            if value is not None:
                bucket[metric].append(value)
    if methods is None:
        methods = list(dict.fromkeys(grouping.values()))
    out = []
    for method in methods:
        bucket = buckets.get(method, {m: [] for m in QUALITY_METRICS})
        out.append(
            MethodQuality(
                method=method,
                means={m: (math.fsum(v) / len(v) if v else None) for m, v in bucket.items()},
                counts={m: len(v) for m, v in bucket.items()},
            )
        )
    return out


# -- file readers -------------------------------------------------------------


def _read_rows(path, required: Sequence[str]):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LfcovError(f"{path}: cannot read: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise LfcovError(f"{path}: not valid UTF-8") from None
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise LfcovError(f"{path}: header is missing column(s): {', '.join(missing)}")
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(row.get(c) is None for c in required):
            raise LfcovError(f"{path}:{lineno}: wrong number of fields")
        yield lineno, row


def _parse_optional_float(value: str, path, lineno, column) -> float | None:
    value = value.strip()
    if not value:
        return None
    try:
        x = float(value)
    except ValueError:
        raise LfcovError(f"{path}:{lineno}: column {column!r} value {value!r} is not a number") from None
    if not math.isfinite(x):
        raise LfcovError(f"{path}:{lineno}: column {column!r} is not finite")
    return x


def read_ir_ratings(path) -> list[IntelligibilityRating]:
    out = []
    for lineno, row in _read_rows(path, IR_COLUMNS):
        label = row["label"].strip()
        if label not in ("0", "1"):
            raise LfcovError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
        speed = _parse_optional_float(row.get("playback_speed") or "", path, lineno, "playback_speed")
        out.append(IntelligibilityRating(row["utterance_id"], row["bigram"], row["rater_id"], int(label), speed))
    return out


def read_mos_ratings(path) -> list[MosRating]:
    out = []
    for lineno, row in _read_rows(path, MOS_COLUMNS):
        try:
            score = int(row["score"].strip())
            out.append(MosRating(row["utterance_id"], row["rater_id"], score))
        except (ValueError, LfcovError):
            raise LfcovError(f"{path}:{lineno}: score must be an integer 1-5, got {row['score']!r}") from None
    return out


def read_quality_rows(path) -> list[QualityRow]:
    out = []
    for lineno, row in _read_rows(path, QUALITY_COLUMNS):
        values = {m: _parse_optional_float(row[m], path, lineno, m) for m in QUALITY_METRICS}
        try:
            out.append(QualityRow(row["utterance_id"], **values))
        except LfcovError as exc:
            raise LfcovError(f"{path}:{lineno}: {exc}") from None
    return out


def read_grouping(path) -> dict[str, str]:
    """``utterance_id,method`` CSV mapping utterances to the system that produced them."""
    return {row["utterance_id"]: row["method"] for _, row in _read_rows(path, ("utterance_id", "method"))}


def read_embeddings(path) -> dict[str, np.ndarray]:
    """One utterance per line: id, then whitespace-separated decimals."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise LfcovError(f"{path}: cannot read: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 2:
            raise LfcovError(f"{path}:{lineno}: no vector after id {parts[0]!r}")
        try:
            out[parts[0]] = np.array([float(x) for x in parts[1:]])
        except ValueError:
            raise LfcovError(f"{path}:{lineno}: non-numeric vector component") from None
    return out


def speaker_similarity(reference: Mapping[str, np.ndarray], synthesized: Mapping[str, np.ndarray]) -> list[QualityRow]:
    """S-SIM rows for every id present in both embedding sets, in synthesized order."""
    return [
        QualityRow(uid, s_sim=cosine_similarity(reference[uid], vec))
        for uid, vec in synthesized.items()
        if uid in reference
    ]
