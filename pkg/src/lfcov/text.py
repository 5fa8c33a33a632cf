"""Unicode normalization, counting-unit segmentation and script tagging."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass

import regex

from lfcov.errors import LfcovError

_WHITESPACE_RUN = re.compile(r"\s+")
_GRAPHEME = regex.compile(r"\X")


@dataclass(frozen=True)
class NormalizationPolicy:
    """How raw manifest text is canonicalized before any counting.

    ``form`` is a :func:`unicodedata.normalize` form. The default is NFC so
    that bigram identity does not depend on how the source encoded
    combining marks.
    """

    form: str = "NFC"
    collapse_whitespace: bool = False
    strip: bool = True
    lowercase: bool = False

    def __post_init__(self):
        if self.form not in ("NFC", "NFD", "NFKC", "NFKD"):
            raise LfcovError(f"unknown normalization form {self.form!r}")

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "collapse_whitespace": self.collapse_whitespace,
            "strip": self.strip,
            "lowercase": self.lowercase,
        }


DEFAULT_NORMALIZATION = NormalizationPolicy()


def normalize_text(raw: str | bytes, policy: NormalizationPolicy = DEFAULT_NORMALIZATION) -> str:
    """Return the canonical form of ``raw``; the result is a fixed point."""
    if isinstance(raw, (bytes, bytearray)):
        try:
            raw = bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LfcovError(f"text is not valid UTF-8: {exc}") from None
    try:
        raw.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise LfcovError(f"text contains unencodable code points: {exc}") from None

    text = unicodedata.normalize(policy.form, raw)
    if policy.lowercase:
        # lower() can emit sequences that are not in the target form
        text = unicodedata.normalize(policy.form, text.lower())
    if policy.collapse_whitespace:
        text = _WHITESPACE_RUN.sub(" ", text)
    if policy.strip:
        text = text.strip()
    return text


def split_units(text: str, unit: str) -> list[str]:
    """Split text into counting units: code points or extended grapheme clusters."""
    if unit == "codepoint":
        return list(text)
    if unit == "grapheme_cluster":
        return _GRAPHEME.findall(text)
    raise LfcovError(f"unknown counting unit {unit!r}")


def count_units(text: str, unit: str) -> int:
    if unit == "codepoint":
        return len(text)
    return len(split_units(text, unit))


# character classes that a BigramPolicy may exclude from pairing
CHAR_CLASSES = ("whitespace", "punctuation", "digit", "symbol", "control")


def char_class(ch: str) -> str | None:
    """Classify a single code point into one of CHAR_CLASSES, or None for letters/marks."""
    if ch.isspace():
        return "whitespace"
    cat = unicodedata.category(ch)
    if cat[0] == "Z":
        return "whitespace"
    if cat[0] == "P":
        return "punctuation"
    if cat == "Nd":
        return "digit"
    if cat[0] == "S":
        return "symbol"
    if cat in ("Cc", "Cf"):
        return "control"
    return None


_SCRIPT_PREFIXES = {
    "DEVANAGARI": "Deva",
    "BENGALI": "Beng",
    "GURMUKHI": "Guru",
    "GUJARATI": "Gujr",
    "ORIYA": "Orya",
    "TAMIL": "Taml",
    "TELUGU": "Telu",
    "KANNADA": "Knda",
    "MALAYALAM": "Mlym",
    "SINHALA": "Sinh",
    "MEETEI": "Mtei",
    "OL": "Olck",
    "LATIN": "Latn",
    "CYRILLIC": "Cyrl",
    "GREEK": "Grek",
    "ARABIC": "Arab",
    "HEBREW": "Hebr",
    "THAI": "Thai",
    "HANGUL": "Hang",
    "HIRAGANA": "Hira",
    "KATAKANA": "Kana",
    "CJK": "Hani",
}


def infer_script(text: str) -> str | None:
    """Guess the dominant ISO 15924 script of ``text`` from its letters.

    Only a helper: manifests carry an explicit ``script`` field and this is
    never used to override it.
    """
    votes: Counter[str] = Counter()
    for ch in text:
        if not unicodedata.category(ch).startswith(("L", "M")):
            continue
        name = unicodedata.name(ch, "")
        code = _SCRIPT_PREFIXES.get(name.split(" ", 1)[0])
        if code:
            votes[code] += 1
    if not votes:
        return None
    # ties resolved alphabetically so the answer is stable
    return min(votes, key=lambda k: (-votes[k], k))
