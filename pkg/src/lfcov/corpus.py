"""Corpus data model, manifest I/O, corpus union and per-corpus statistics."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from lfcov.errors import LfcovError, ManifestError
from lfcov.text import DEFAULT_NORMALIZATION, NormalizationPolicy, infer_script, normalize_text

log = logging.getLogger(__name__)

QUALITIES = ("studio", "field", "synthetic")
ROLES = ("baseline", "proximal", "multilingual", "asr", "synthetic", "reference_text", "pool")

# manifest keys in write order; anything else is carried in Utterance.extra
MANIFEST_FIELDS = (
    "id",
    "text",
    "audio_ref",
    "duration_s",
    "speaker_id",
    "language",
    "script",
    "source",
    "quality",
)


@dataclass(frozen=True)
class Utterance:
    id: str
    text: str
    audio_ref: str | None = None
    duration_s: float | None = None
    speaker_id: str | None = None
    language: str | None = None
    script: str | None = None
    source: str | None = None
    quality: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.text:
            raise LfcovError(f"utterance {self.id!r}: text is empty")
        if self.duration_s is not None and not (self.duration_s >= 0 and math.isfinite(self.duration_s)):
            raise LfcovError(f"utterance {self.id!r}: duration_s must be a finite number >= 0")
        if self.quality is not None and self.quality not in QUALITIES:
            raise LfcovError(
                f"utterance {self.id!r}: quality {self.quality!r} not one of {', '.join(QUALITIES)}"
            )

    def to_record(self) -> dict:
        rec = {}
        for key in MANIFEST_FIELDS:
            value = getattr(self, key)
            if value is not None:
                rec[key] = value
        rec.update(self.extra)
        return rec


@dataclass(frozen=True)
class Corpus:
    name: str
    role: str = "baseline"
    utterances: tuple[Utterance, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise LfcovError(f"corpus {self.name!r}: role {self.role!r} not one of {', '.join(ROLES)}")
        object.__setattr__(self, "utterances", tuple(self.utterances))
        seen = set()
        for u in self.utterances:
            if u.id in seen:
                raise LfcovError(f"corpus {self.name!r}: duplicate utterance id {u.id!r}")
            seen.add(u.id)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    @property
    def texts(self) -> list[str]:
        return [u.text for u in self.utterances]

    @property
    def total_chars(self) -> int:
        return sum(len(u.text) for u in self.utterances)

    def ids(self) -> list[str]:
        return [u.id for u in self.utterances]

    def by_id(self) -> dict[str, Utterance]:
        return {u.id: u for u in self.utterances}


@dataclass(frozen=True)
class StatsRow:
    corpus_name: str
    total_hours: float
    num_speakers: int
    num_languages: int
    num_utterances: int
    studio: bool
    durations_complete: bool = True

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus_name,
            "studio": self.studio,
            "total_hours": self.total_hours,
            "num_speakers": self.num_speakers,
            "num_languages": self.num_languages,
            "num_utterances": self.num_utterances,
            "durations_complete": self.durations_complete,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StatsRow":
        return cls(
            corpus_name=d["corpus"],
            total_hours=float(d["total_hours"]),
            num_speakers=int(d["num_speakers"]),
            num_languages=int(d["num_languages"]),
            num_utterances=int(d["num_utterances"]),
            studio=bool(d["studio"]),
            durations_complete=bool(d.get("durations_complete", True)),
        )


def _optional_str(rec: dict, key: str, path, lineno: int) -> str | None:
    value = rec.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ManifestError(f"field {key!r} must be a string", path, lineno)
    return value


def parse_record(
    rec: dict,
    policy: NormalizationPolicy = DEFAULT_NORMALIZATION,
    path=None,
    lineno: int | None = None,
) -> Utterance:
    if not isinstance(rec, dict):
        raise ManifestError("record is not an object", path, lineno)
    uid = rec.get("id")
    if not isinstance(uid, str) or not uid:
        raise ManifestError("missing or non-string 'id'", path, lineno)
    raw = rec.get("text")
    if not isinstance(raw, str):
        raise ManifestError(f"utterance {uid!r}: missing or non-string 'text'", path, lineno)
    try:
        text = normalize_text(raw, policy)
    except LfcovError as exc:
        raise ManifestError(f"utterance {uid!r}: {exc}", path, lineno) from None
    if not text:
        raise ManifestError(f"utterance {uid!r}: text is empty after normalization", path, lineno)

    duration = rec.get("duration_s")
    if duration is not None:
        if isinstance(duration, bool) or not isinstance(duration, (int, float)):
            raise ManifestError(f"utterance {uid!r}: duration_s must be a number", path, lineno)
        duration = float(duration)
    extra = {k: v for k, v in rec.items() if k not in MANIFEST_FIELDS}
    try:
        return Utterance(
            id=uid,
            text=text,
            audio_ref=_optional_str(rec, "audio_ref", path, lineno),
            duration_s=duration,
            speaker_id=_optional_str(rec, "speaker_id", path, lineno),
            language=_optional_str(rec, "language", path, lineno),
            script=_optional_str(rec, "script", path, lineno),
            source=_optional_str(rec, "source", path, lineno),
            quality=_optional_str(rec, "quality", path, lineno),
            extra=extra,
        )
    except ManifestError:
        raise
    except LfcovError as exc:
        raise ManifestError(str(exc), path, lineno) from None


def load_manifest(
    path: str | os.PathLike,
    policy: NormalizationPolicy = DEFAULT_NORMALIZATION,
    name: str | None = None,
    role: str = "baseline",
) -> Corpus:
    """Read a JSON-lines manifest into a Corpus, normalizing every text.

    Blank lines are ignored. Errors carry the 1-based line number.
    """
    path = Path(path)
    if name is None:
        name = path.name.split(".")[0]
    utterances = []
    seen: dict[str, int] = {}
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot open manifest: {exc.strerror}", path) from None
    with fh:
        try:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ManifestError(f"malformed record: {exc.msg}", path, lineno) from None
                utt = parse_record(rec, policy, path, lineno)
                if utt.id in seen:
                    raise ManifestError(
                        f"duplicate utterance id {utt.id!r} (first seen on line {seen[utt.id]})",
                        path,
                        lineno,
                    )
                seen[utt.id] = lineno
                utterances.append(utt)
        except UnicodeDecodeError as exc:
            raise ManifestError(f"file is not valid UTF-8: {exc.reason}", path) from None
    return Corpus(name=name, role=role, utterances=tuple(utterances))


def load_text_lines(
    path: str | os.PathLike,
    policy: NormalizationPolicy = DEFAULT_NORMALIZATION,
    name: str | None = None,
    role: str = "reference_text",
) -> Corpus:
    """Read a plain text file, one sentence per line, as a text-only corpus.

    Utterance ids are ``<name>:<line number>``; empty lines are skipped.
    """
    path = Path(path)
    if name is None:
        name = path.name.split(".")[0]
    utterances = []
    try:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = normalize_text(line.rstrip("\n"), policy)
                if text:
                    utterances.append(Utterance(id=f"{name}:{lineno}", text=text))
    except OSError as exc:
        raise ManifestError(f"cannot open text file: {exc.strerror}", path) from None
    except UnicodeDecodeError as exc:
        raise ManifestError(f"file is not valid UTF-8: {exc.reason}", path) from None
    return Corpus(name=name, role=role, utterances=tuple(utterances))


def load_corpus(path, policy=DEFAULT_NORMALIZATION, name=None, role="baseline") -> Corpus:
    """Dispatch on extension: ``.txt`` is plain text, anything else a manifest."""
    if str(path).endswith(".txt"):
        return load_text_lines(path, policy, name=name, role=role)
    return load_manifest(path, policy, name=name, role=role)


def load_many(paths: Sequence, policy=DEFAULT_NORMALIZATION, role="baseline", workers: int = 1) -> list[Corpus]:
    """Load several corpora, optionally concurrently; output order follows ``paths``."""
    if workers <= 1 or len(paths) <= 1:
        return [load_corpus(p, policy, role=role) for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: load_corpus(p, policy, role=role), paths))


def dump_manifest(corpus: Corpus | Iterable[Utterance], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt in corpus:
            fh.write(json.dumps(utt.to_record(), ensure_ascii=False))
            fh.write("\n")


def merge_corpora(parts: Sequence[Corpus], name: str, role: str | None = None, dedup: bool = False) -> Corpus:
    """Union of corpora in the given order.

    Colliding ids are an error unless ``dedup`` is set, in which case the
    first occurrence wins.
    """
    if role is None:
        role = parts[0].role if parts else "baseline"
    merged = []
    origin: dict[str, str] = {}
    for part in parts:
        for utt in part.utterances:
            if utt.id in origin:
                if dedup:
                    continue
                raise LfcovError(
                    f"utterance id {utt.id!r} occurs in both {origin[utt.id]!r} and {part.name!r}"
                )
            origin[utt.id] = part.name
            merged.append(utt)
    return Corpus(name=name, role=role, utterances=tuple(merged))


def corpus_stats(corpus: Corpus) -> StatsRow:
    durations = [u.duration_s for u in corpus if u.duration_s is not None]
    speakers = {u.speaker_id for u in corpus if u.speaker_id is not None}
    languages = {u.language for u in corpus if u.language is not None}
    n = len(corpus)
    return StatsRow(
        corpus_name=corpus.name,
        total_hours=math.fsum(durations) / 3600.0,
        num_speakers=len(speakers),
        num_languages=len(languages),
        num_utterances=n,
        studio=n > 0 and all(u.quality == "studio" for u in corpus),
        durations_complete=len(durations) == n,
    )


def with_inferred_scripts(corpus: Corpus) -> Corpus:
    """Fill in missing ``script`` tags from the text; present tags are kept."""
    utts = []
    for u in corpus:
        if u.script is None:
            guess = infer_script(u.text)
            if guess is not None:
                u = replace(u, script=guess)
        utts.append(u)
    return Corpus(name=corpus.name, role=corpus.role, utterances=tuple(utts))


__all__ = [
    "Corpus",
    "NormalizationPolicy",
    "StatsRow",
    "Utterance",
    "corpus_stats",
    "dump_manifest",
    "load_corpus",
    "load_manifest",
    "load_many",
    "load_text_lines",
    "merge_corpora",
    "normalize_text",
    "parse_record",
    "with_inferred_scripts",
]
