"""Coverage and relative-growth accounting for augmentation scenarios."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from lfcov.bigrams import (
    BigramPolicy,
    FrequencyTable,
    LfSet,
    check_policy,
    count_bigrams,
    lf_hits,
    missing_lf,
)
from lfcov.corpus import Corpus
from lfcov.errors import LfcovError, UndefinedRelativeGrowthError
from lfcov.planner import DEFAULT_CHARS_PER_SECOND, estimate_duration

log = logging.getLogger(__name__)

METHODS = ("proximal", "multilingual", "asr", "synthetic")
SCRIPT_POLICIES = ("all_additions", "same_script_only")


@dataclass(frozen=True)
class Scenario:
    name: str
    base: Corpus
    additions: tuple = ()  # (Corpus, method) pairs
    target_script: str | None = None
    script_policy: str = "same_script_only"

    def __post_init__(self):
        if self.base.role != "baseline":
            raise LfcovError(f"scenario {self.name!r}: base corpus must have role 'baseline', got {self.base.role!r}")
        if self.script_policy not in SCRIPT_POLICIES:
            raise LfcovError(f"unknown script policy {self.script_policy!r}")
        additions = tuple((c, m) for c, m in self.additions)
        for _, method in additions:
            if method not in METHODS:
                raise LfcovError(f"unknown augmentation method {method!r}; expected one of {', '.join(METHODS)}")
        object.__setattr__(self, "additions", additions)

    def contributing(self) -> list:
        """Addition utterances whose bigrams count toward growth and coverage."""
        out = []
        for corpus, _ in self.additions:
            for utt in corpus:
                if self.script_policy == "same_script_only":
                    if utt.script is None:
                        raise LfcovError(
                            f"scenario {self.name!r}: utterance {utt.id!r} in {corpus.name!r} has no script tag"
                        )
                    if utt.script != self.target_script:
                        continue
                out.append(utt)
        return out


@dataclass(frozen=True)
class ScenarioMetrics:
    scenario: str
    delta_f: int
    delta_g: int
    delta_g_rel: Fraction | None  # None when the baseline has no LF occurrences
    lf_mass_base: int
    missing_before: int
    missing_after: int
    hours_added: float
    total_hours: float
    hours_estimated: bool = False
    lf_provenance: dict = field(default_factory=dict)
    synthetic_violations: tuple = ()

    def to_dict(self) -> dict:
        rel = self.delta_g_rel
        return {
            "scenario": self.scenario,
            "delta_f": self.delta_f,
            "delta_g": self.delta_g,
            "delta_g_rel": None if rel is None else [rel.numerator, rel.denominator],
            "lf_mass_base": self.lf_mass_base,
            "missing_before": self.missing_before,
            "missing_after": self.missing_after,
            "hours_added": self.hours_added,
            "total_hours": self.total_hours,
            "hours_estimated": self.hours_estimated,
            "lf_provenance": self.lf_provenance,
            "synthetic_violations": list(self.synthetic_violations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioMetrics":
        rel = d.get("delta_g_rel")
        return cls(
            scenario=d["scenario"],
            delta_f=int(d["delta_f"]),
            delta_g=int(d["delta_g"]),
            delta_g_rel=None if rel is None else Fraction(int(rel[0]), int(rel[1])),
            lf_mass_base=int(d["lf_mass_base"]),
            missing_before=int(d["missing_before"]),
            missing_after=int(d["missing_after"]),
            hours_added=float(d["hours_added"]),
            total_hours=float(d["total_hours"]),
            hours_estimated=bool(d.get("hours_estimated", False)),
            lf_provenance=d.get("lf_provenance", {}),
            synthetic_violations=tuple(d.get("synthetic_violations", ())),
        )


def _lf_view(table: FrequencyTable, lf: LfSet) -> dict:
    return {bg: n for bg, n in table.counts.items() if bg in lf.bigrams}


def coverage_delta(base: FrequencyTable, augmented: FrequencyTable, lf: LfSet) -> int:
    """Number of LF bigrams present after augmentation minus those present before."""
    check_policy(lf.policy, base.policy, augmented.policy)
    return len(_lf_view(augmented, lf)) - len(_lf_view(base, lf))


def growth(base: FrequencyTable, augmented: FrequencyTable, lf: LfSet) -> tuple[int, int]:
    """Return (added LF occurrences, baseline LF occurrence mass)."""
    check_policy(lf.policy, base.policy, augmented.policy)
    mass_base = sum(_lf_view(base, lf).values())
    return sum(_lf_view(augmented, lf).values()) - mass_base, mass_base


def relative_growth(delta_g: int, lf_mass_base: int) -> Fraction:
    if lf_mass_base <= 0:
        raise UndefinedRelativeGrowthError(
            "relative growth is undefined: the baseline contains no low-frequency bigram occurrences"
        )
    return Fraction(delta_g, lf_mass_base)


def corpus_hours(corpus_or_utts, chars_per_second: float, unit: str = "codepoint", strict: bool = False):
    """Hours from manifest durations; missing ones are estimated from text length.

    Returns ``(hours, estimated)``.
    """
    seconds = []
    estimated = False
    for utt in corpus_or_utts:
        if utt.duration_s is not None:
            seconds.append(utt.duration_s)
        elif strict:
            raise LfcovError(f"utterance {utt.id!r} has no duration and strict hours were requested")
        else:
            seconds.append(estimate_duration(utt.text, chars_per_second, unit))
            estimated = True
    return math.fsum(seconds) / 3600.0, estimated


def scenario_metrics(
    scenario: Scenario,
    lf: LfSet,
    policy: BigramPolicy | None = None,
    *,
    strict_hours: bool = False,
    chars_per_second: float = DEFAULT_CHARS_PER_SECOND,
    shards: int = 1,
    base_table: FrequencyTable | None = None,
) -> ScenarioMetrics:
    """Score one scenario against the LF set.

    Under ``same_script_only`` only addition utterances written in the
    target script enter the augmented table; hours always cover the full
    data mix.
    """
    policy = policy or lf.policy
    check_policy(lf.policy, policy)
    if base_table is None:
        base_table = count_bigrams(scenario.base, policy, shards=shards)
    check_policy(policy, base_table.policy)
    contributing = scenario.contributing()
    added = count_bigrams([u.text for u in contributing], policy, shards=shards, name=scenario.name)
    augmented = base_table + added

    delta_f = coverage_delta(base_table, augmented, lf)
    delta_g, mass = growth(base_table, augmented, lf)
    rel = relative_growth(delta_g, mass) if mass > 0 else None

    violations = []
    for corpus, method in scenario.additions:
        if method != "synthetic":
            continue
        for utt in corpus:
            if not lf_hits(utt.text, lf, policy):
                violations.append(utt.id)
    if violations:
        log.warning(
            "scenario %s: %d synthetic utterance(s) cover no low-frequency bigram: %s",
            scenario.name,
            len(violations),
            ", ".join(violations),
        )

    added_utts = [u for corpus, _ in scenario.additions for u in corpus]
    hours_added, est_added = corpus_hours(added_utts, chars_per_second, policy.unit, strict_hours)
    base_hours, est_base = corpus_hours(scenario.base, chars_per_second, policy.unit, strict_hours)
    return ScenarioMetrics(
        scenario=scenario.name,
        delta_f=delta_f,
        delta_g=delta_g,
        delta_g_rel=rel,
        lf_mass_base=mass,
        missing_before=missing_lf(base_table, lf),
        missing_after=missing_lf(augmented, lf),
        hours_added=hours_added,
        total_hours=base_hours + hours_added,
        hours_estimated=est_added or est_base,
        lf_provenance=lf.provenance_dict(),
        synthetic_violations=tuple(violations),
    )


COMPARISON_COLUMNS = ("scenario", "delta_f", "delta_g_rel", "missing_after", "hours_added")


@dataclass(frozen=True)
class ComparisonTable:
    """Scenario rows in input order plus the names holding each column's best value.

    Best means largest for delta_f, delta_g_rel and hours_added, smallest for
    missing_after.
    """

    rows: tuple
    flags: dict
    lf_provenance: dict

    def to_dict(self) -> dict:
        return {
            "columns": list(COMPARISON_COLUMNS),
            "lf_provenance": self.lf_provenance,
            "rows": [r.to_dict() for r in self.rows],
            "flags": {k: list(v) for k, v in self.flags.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonTable":
        return compare_scenarios([ScenarioMetrics.from_dict(r) for r in d["rows"]])


def _best(rows, attr, pick):
    values = [getattr(r, attr) for r in rows if getattr(r, attr) is not None]
    if not values:
        return ()
    target = pick(values)
    return tuple(r.scenario for r in rows if getattr(r, attr) == target)


def compare_scenarios(rows: Sequence[ScenarioMetrics]) -> ComparisonTable:
    rows = tuple(rows)
    if not rows:
        raise LfcovError("nothing to compare: no scenario rows")
    prov = rows[0].lf_provenance
    for r in rows[1:]:
        if r.lf_provenance != prov:
            raise LfcovError(
                f"scenario {r.scenario!r} was scored against a different LF set than {rows[0].scenario!r}"
            )
    flags = {
        "delta_f": _best(rows, "delta_f", max),
        "delta_g_rel": _best(rows, "delta_g_rel", max),
        "missing_after": _best(rows, "missing_after", min),
        "hours_added": _best(rows, "hours_added", max),
    }
    return ComparisonTable(rows, flags, prov)
