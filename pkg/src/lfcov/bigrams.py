"""Character-bigram extraction and counting, thresholds and low-frequency sets.

Counting is vectorized with numpy: a chunk of texts is turned into one
array of dense unit ids, pair keys are formed with a single multiply-add,
and the pairs that straddle an utterance boundary (or touch a skipped
unit) are masked out before ``np.bincount``. Partial tables from chunks
and shards are merged by exact integer summation, so results never depend
on how the corpus was split.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lfcov.corpus import Corpus
from lfcov.errors import LfcovError, PolicyMismatchError
from lfcov.text import CHAR_CLASSES, char_class, split_units

Bigram = tuple[str, str]

UNITS = ("codepoint", "grapheme_cluster")
_MAX_CODEPOINT = 0x110000
# above this many possible keys the dense bincount gives way to np.unique
_DENSE_KEY_LIMIT = 1 << 26
CHUNK_UNITS = 4_000_000


@dataclass(frozen=True)
class BigramPolicy:
    unit: str = "codepoint"
    skip_classes: frozenset = frozenset()
    cross_token: bool = False

    def __post_init__(self):
        if self.unit not in UNITS:
            raise LfcovError(f"unknown counting unit {self.unit!r}; expected one of {', '.join(UNITS)}")
        classes = frozenset(self.skip_classes)
        unknown = classes - set(CHAR_CLASSES)
        if unknown:
            raise LfcovError(
                f"unknown skip class(es) {', '.join(sorted(unknown))}; expected from {', '.join(CHAR_CLASSES)}"
            )
        object.__setattr__(self, "skip_classes", classes)

    def skips(self, unit: str) -> bool:
        return bool(self.skip_classes) and char_class(unit[0]) in self.skip_classes

    def to_dict(self) -> dict:
        return {
            "unit": self.unit,
            "skip_classes": sorted(self.skip_classes),
            "cross_token": self.cross_token,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BigramPolicy":
        return cls(
            unit=d.get("unit", "codepoint"),
            skip_classes=frozenset(d.get("skip_classes", ())),
            cross_token=bool(d.get("cross_token", False)),
        )

    def describe(self) -> str:
        skips = ",".join(sorted(self.skip_classes)) or "none"
        return f"unit={self.unit} skip={skips} cross_token={str(self.cross_token).lower()}"


DEFAULT_POLICY = BigramPolicy()


def _sort_key(item):
    (a, b), n = item
    return (-n, a, b)


@dataclass(frozen=True)
class FrequencyTable:
    """Bigram counts over one corpus. Zero counts are never stored."""

    counts: dict = field(default_factory=dict)
    policy: BigramPolicy = DEFAULT_POLICY
    corpus_name: str = ""

    def __post_init__(self):
        for bg, n in self.counts.items():
            if n < 1:
                raise LfcovError(f"bigram {bg!r} has non-positive count {n}")
        # canonical order: descending count, then lexicographic bigram
        object.__setattr__(self, "counts", dict(sorted(self.counts.items(), key=_sort_key)))

    @property
    def total_pairs(self) -> int:
        return sum(self.counts.values())

    @property
    def bigrams(self) -> set:
        return set(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, bigram) -> bool:
        return bigram in self.counts

    def get(self, bigram, default: int = 0) -> int:
        return self.counts.get(bigram, default)

    def __add__(self, other: "FrequencyTable") -> "FrequencyTable":
        check_policy(self.policy, other.policy)
        merged = Counter(self.counts)
        merged.update(other.counts)
        return FrequencyTable(dict(merged), self.policy, f"{self.corpus_name}+{other.corpus_name}")

    # -- export / import ---------------------------------------------------

    def to_tsv(self) -> str:
        lines = [
            "# lfcov frequency table",
            f"# corpus: {self.corpus_name}",
            f"# policy: {json.dumps(self.policy.to_dict(), sort_keys=True)}",
            f"# total_pairs: {self.total_pairs}",
            "first\tsecond\tcount",
        ]
        for (a, b), n in self.counts.items():
            lines.append(f"{escape_unit(a)}\t{escape_unit(b)}\t{n}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "FrequencyTable":
        meta, rows = _split_header(text)
        counts = {}
        for lineno, row in rows:
            if row == "first\tsecond\tcount":
                continue
            parts = row.split("\t")
            if len(parts) != 3:
                raise LfcovError(f"line {lineno}: expected 3 tab-separated fields")
            try:
                n = int(parts[2])
            except ValueError:
                raise LfcovError(f"line {lineno}: count {parts[2]!r} is not an integer") from None
            counts[(unescape_unit(parts[0]), unescape_unit(parts[1]))] = n
        policy = BigramPolicy.from_dict(json.loads(meta.get("policy", "{}")))
        return cls(counts, policy, meta.get("corpus", ""))

    def to_json(self) -> str:
        doc = {
            "corpus": self.corpus_name,
            "policy": self.policy.to_dict(),
            "total_pairs": self.total_pairs,
            "counts": [[a, b, n] for (a, b), n in self.counts.items()],
        }
        return json.dumps(doc, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FrequencyTable":
        doc = json.loads(text)
        counts = {(a, b): int(n) for a, b, n in doc["counts"]}
        return cls(counts, BigramPolicy.from_dict(doc["policy"]), doc.get("corpus", ""))


@dataclass(frozen=True)
class LfSet:
    threshold_t: int
    bigrams: frozenset
    reference_name: str = ""
    policy: BigramPolicy = DEFAULT_POLICY
    percentile_p: float | None = None

    def __post_init__(self):
        if self.threshold_t < 1:
            raise LfcovError("threshold t must be a positive integer")
        object.__setattr__(self, "bigrams", frozenset(self.bigrams))

    def __len__(self) -> int:
        return len(self.bigrams)

    def __contains__(self, bigram) -> bool:
        return bigram in self.bigrams

    def __iter__(self):
        return iter(sorted(self.bigrams))

    @property
    def provenance(self) -> tuple:
        return (self.reference_name, self.threshold_t, self.policy)

    def provenance_dict(self) -> dict:
        d = {
            "reference": self.reference_name,
            "threshold_t": self.threshold_t,
            "size": len(self.bigrams),
            "policy": self.policy.to_dict(),
        }
        if self.percentile_p is not None:
            d["percentile_p"] = self.percentile_p
        return d

    def dumps(self) -> str:
        lines = ["# lfcov lf-set", f"# threshold_t: {self.threshold_t}"]
        if self.percentile_p is not None:
            lines.append(f"# percentile_p: {self.percentile_p}")
        lines += [
            f"# reference: {self.reference_name}",
            f"# policy: {json.dumps(self.policy.to_dict(), sort_keys=True)}",
            f"# size: {len(self.bigrams)}",
        ]
        lines += [f"{escape_unit(a)}\t{escape_unit(b)}" for a, b in sorted(self.bigrams)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LfSet":
        meta, rows = _split_header(text)
        if "threshold_t" not in meta:
            raise LfcovError("lf-set file has no 'threshold_t' header")
        bigrams = set()
        for lineno, row in rows:
            parts = row.split("\t")
            if len(parts) != 2:
                raise LfcovError(f"line {lineno}: expected 2 tab-separated units")
            bigrams.add((unescape_unit(parts[0]), unescape_unit(parts[1])))
        try:
            t = int(meta["threshold_t"])
            p = float(meta["percentile_p"]) if "percentile_p" in meta else None
            policy = BigramPolicy.from_dict(json.loads(meta.get("policy", "{}")))
        except (ValueError, json.JSONDecodeError) as exc:
            raise LfcovError(f"bad lf-set header: {exc}") from None
        if "size" in meta and int(meta["size"]) != len(bigrams):
            raise LfcovError(f"lf-set declares size {meta['size']} but lists {len(bigrams)} bigrams")
        return cls(t, frozenset(bigrams), meta.get("reference", ""), policy, p)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "LfSet":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise LfcovError(f"{path}: cannot read lf-set file: {exc.strerror}") from None
        try:
            return cls.loads(text)
        except LfcovError as exc:
            raise LfcovError(f"{path}: {exc}") from None


def _split_header(text: str):
    meta = {}
    rows = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line:
            continue
        if line.startswith("# "):
            key, sep, value = line[2:].partition(": ")
            if sep:
                meta[key] = value
            continue
        rows.append((lineno, line))
    return meta, rows


def escape_unit(unit: str) -> str:
    """Make a counting unit safe for tab-separated, line-oriented files."""
    out = []
    for ch in unit:
        if ch == " ":
            out.append("\\u0020")
        elif ch in '\\"' or char_class(ch) in ("whitespace", "control") or 0xD800 <= ord(ch) <= 0xDFFF:
            out.append(json.dumps(ch, ensure_ascii=True)[1:-1])
        else:
            out.append(ch)
    return "".join(out)


def unescape_unit(text: str) -> str:
    try:
        return json.loads('"' + text + '"')
    except json.JSONDecodeError:
        raise LfcovError(f"bad escaped unit {text!r}") from None


def check_policy(*policies: BigramPolicy) -> None:
    first = policies[0]
    for p in policies[1:]:
        if p != first:
            raise PolicyMismatchError(f"bigram policy mismatch: {first.describe()} vs {p.describe()}")


# -- extraction ---------------------------------------------------------------


def extract_bigrams(text: str, policy: BigramPolicy = DEFAULT_POLICY) -> list[Bigram]:
    """Ordered bigrams of one normalized text."""
    units = split_units(text, policy.unit)
    if not policy.skip_classes:
        return list(zip(units, units[1:]))
    if policy.cross_token:
        kept = [u for u in units if not policy.skips(u)]
        return list(zip(kept, kept[1:]))
    skipped = [policy.skips(u) for u in units]
    return [
        (units[j], units[j + 1])
        for j in range(len(units) - 1)
        if not skipped[j] and not skipped[j + 1]
    ]


def lf_hits(text: str, lf: LfSet, policy: BigramPolicy | None = None) -> set:
    """Distinct LF bigrams occurring in ``text``."""
    return {bg for bg in extract_bigrams(text, policy or lf.policy) if bg in lf.bigrams}


# -- counting -----------------------------------------------------------------


def _count_ids(ids: np.ndarray, lens: np.ndarray, k: int, skip: np.ndarray | None, cross_token: bool) -> dict:
    """Count id pairs within utterances. Returns {(id_a, id_b): count}."""
    if skip is not None and skip.any():
        unit_skipped = skip[ids]
        if cross_token:
            owner = np.repeat(np.arange(len(lens)), lens)
            keep = ~unit_skipped
            ids = ids[keep]
            lens = np.bincount(owner[keep], minlength=len(lens))
            unit_skipped = None
    else:
        unit_skipped = None

    m = len(ids)
    if m < 2:
        return {}
    valid = np.ones(m - 1, dtype=bool)
    ends = np.cumsum(lens)[:-1]
    ends = ends[(ends > 0) & (ends < m)]
    valid[ends - 1] = False
    if unit_skipped is not None:
        valid &= ~unit_skipped[:-1]
        valid &= ~unit_skipped[1:]

    keys = ids[:-1].astype(np.int64) * k + ids[1:]
    keys = keys[valid]
    if k * k <= _DENSE_KEY_LIMIT:
        c = np.bincount(keys, minlength=k * k)
        nz = np.flatnonzero(c)
        counts = c[nz]
    else:
        nz, counts = np.unique(keys, return_counts=True)
    return {(int(key) // k, int(key) % k): int(n) for key, n in zip(nz, counts)}


def _count_chunk_codepoint(texts: Sequence[str], policy: BigramPolicy) -> Counter:
    lens = np.fromiter(map(len, texts), dtype=np.int64, count=len(texts))
    cps = np.frombuffer("".join(texts).encode("utf-32-le"), dtype=np.uint32)
    if len(cps) == 0:
        return Counter()
    present = np.bincount(cps, minlength=_MAX_CODEPOINT)
    alphabet = np.flatnonzero(present)
    lut = np.zeros(_MAX_CODEPOINT, dtype=np.int32)
    lut[alphabet] = np.arange(len(alphabet), dtype=np.int32)
    ids = lut[cps]
    chars = [chr(c) for c in alphabet]
    skip = None
    if policy.skip_classes:
        skip = np.array([policy.skips(ch) for ch in chars], dtype=bool)
    pairs = _count_ids(ids, lens, len(chars), skip, policy.cross_token)
    return Counter({(chars[a], chars[b]): n for (a, b), n in pairs.items()})


def _count_chunk_grapheme(texts: Sequence[str], policy: BigramPolicy) -> Counter:
    vocab: dict[str, int] = {}
    seq: list[int] = []
    lens = np.zeros(len(texts), dtype=np.int64)
    for i, text in enumerate(texts):
        units = split_units(text, policy.unit)
        lens[i] = len(units)
        seq.extend(vocab.setdefault(u, len(vocab)) for u in units)
    if not seq:
        return Counter()
    labels = list(vocab)
    skip = None
    if policy.skip_classes:
        skip = np.array([policy.skips(u) for u in labels], dtype=bool)
    ids = np.asarray(seq, dtype=np.int64)
    pairs = _count_ids(ids, lens, len(labels), skip, policy.cross_token)
    return Counter({(labels[a], labels[b]): n for (a, b), n in pairs.items()})


def _count_shard(texts: Sequence[str], policy: BigramPolicy, chunk_units: int) -> Counter:
    count_chunk = _count_chunk_codepoint if policy.unit == "codepoint" else _count_chunk_grapheme
    total: Counter = Counter()
    start = 0
    while start < len(texts):
        stop, size = start, 0
        while stop < len(texts) and (size < chunk_units or stop == start):
            size += len(texts[stop])
            stop += 1
        total.update(count_chunk(texts[start:stop], policy))
        start = stop
    return total


def shard_bounds(n: int, shards: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into ``shards`` contiguous, near-equal pieces."""
    shards = max(1, shards)
    step, extra = divmod(n, shards)
    bounds, start = [], 0
    for i in range(shards):
        stop = start + step + (1 if i < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def count_bigrams(
    corpus: Corpus | Iterable[str],
    policy: BigramPolicy = DEFAULT_POLICY,
    shards: int = 1,
    workers: int | None = None,
    chunk_units: int = CHUNK_UNITS,
    name: str | None = None,
) -> FrequencyTable:
    """Count bigram occurrences over every utterance of ``corpus``.

    ``shards`` splits the corpus into contiguous pieces counted
    independently (on up to ``workers`` threads) and summed; the table is
    identical for any shard count.
    """
    if isinstance(corpus, Corpus):
        texts = corpus.texts
        name = corpus.name if name is None else name
    else:
        texts = list(corpus)
    if shards < 1:
        raise LfcovError("shards must be >= 1")
    pieces = [texts[a:b] for a, b in shard_bounds(len(texts), shards)]
    if workers is None:
        workers = min(shards, os.cpu_count() or 1)
    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda p: _count_shard(p, policy, chunk_units), pieces))
    else:
        partials = [_count_shard(p, policy, chunk_units) for p in pieces]
    total: Counter = Counter()
    for part in partials:
        total.update(part)
    return FrequencyTable(dict(total), policy, name or "")


# -- thresholds and LF sets -----------------------------------------------------


def as_fraction(p) -> Fraction:
    """Exact value of a user-facing fraction; floats go through their shortest repr."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(repr(p))
    return Fraction(p)


def percentile_threshold(table: FrequencyTable, p) -> int:
    """Nearest-rank percentile of the per-bigram counts: value at rank ceil(p*n)."""
    frac = as_fraction(p)
    if not 0 < frac < 1:
        raise LfcovError(f"percentile must lie strictly between 0 and 1, got {p}")
    if not table.counts:
        raise LfcovError("cannot take a percentile of an empty frequency table")
    values = sorted(table.counts.values())
    rank = max(1, math.ceil(frac * len(values)))
    return values[rank - 1]


def build_lf_set(reference: FrequencyTable, t: int, percentile_p: float | None = None) -> LfSet:
    """Bigrams of the reference table whose count is strictly below ``t``."""
    if not isinstance(t, (int, np.integer)) or isinstance(t, bool) or t < 1:
        raise LfcovError(f"threshold must be a positive integer, got {t!r}")
    members = frozenset(bg for bg, n in reference.counts.items() if n < t)
    return LfSet(int(t), members, reference.corpus_name, reference.policy, percentile_p)


def missing_lf(table: FrequencyTable, lf: LfSet) -> int:
    """How many LF bigrams never occur in ``table``."""
    check_policy(lf.policy, table.policy)
    return sum(1 for bg in lf.bigrams if bg not in table.counts)
