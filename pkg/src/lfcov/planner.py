"""Budgeted greedy selection of pool sentences for a synthetic corpus.

Both objectives are coverage-like: a sentence's marginal gain can only
shrink as the selection grows. That lets the loop run as a lazy greedy
(stale heap keys are optimistic bounds), which picks exactly what the
plain "rescore everything each round" greedy would pick under the same
total tie-break order.
"""

from __future__ import annotations

import heapq
import json
import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

from lfcov.bigrams import check_policy, extract_bigrams, lf_hits, shard_bounds
from lfcov.corpus import Corpus
from lfcov.errors import LfcovError
from lfcov.text import count_units

log = logging.getLogger(__name__)

DEFAULT_CHARS_PER_SECOND = 12.0
OBJECTIVES = ("coverage", "frequency_target")
STOP_REASONS = ("budget_exhausted", "no_positive_gain", "pool_exhausted", "target_met")


def estimate_duration(text: str, rate: float, unit: str = "codepoint") -> float:
    """Seconds needed to speak ``text`` at ``rate`` counting units per second."""
    if rate <= 0:
        raise LfcovError("chars_per_second must be positive")
    return count_units(text, unit) / rate


@dataclass(frozen=True)
class Budget:
    """Exactly one of ``max_hours``, ``max_chars`` or ``max_sentences`` must be set.

    ``max_sentences`` is the unit-cost mode (every sentence costs 1).
    """

    max_hours: float | None = None
    max_chars: int | None = None
    max_sentences: int | None = None
    chars_per_second: float = DEFAULT_CHARS_PER_SECOND

    def __post_init__(self):
        limits = [x for x in (self.max_hours, self.max_chars, self.max_sentences) if x is not None]
        if len(limits) != 1:
            raise LfcovError("a budget needs exactly one of max_hours, max_chars, max_sentences")
        if not limits[0] > 0:
            raise LfcovError("budget limit must be positive")
        if not self.chars_per_second > 0:
            raise LfcovError("chars_per_second must be positive")

    @property
    def kind(self) -> str:
        if self.max_hours is not None:
            return "hours"
        if self.max_chars is not None:
            return "chars"
        return "sentences"

    def capacity(self) -> Fraction:
        if self.max_hours is not None:
            # decimal reading of the user's value: 27.67 h is exactly 99612 s
            return Fraction(repr(float(self.max_hours))) * 3600
        if self.max_chars is not None:
            return Fraction(self.max_chars)
        return Fraction(self.max_sentences)

    def est_seconds(self, utt, unit: str) -> Fraction:
        if utt.duration_s is not None:
            return Fraction(utt.duration_s)
        return Fraction(count_units(utt.text, unit)) / Fraction(repr(float(self.chars_per_second)))

    def cost(self, utt, unit: str) -> Fraction:
        if self.max_hours is not None:
            return self.est_seconds(utt, unit)
        if self.max_chars is not None:
            return Fraction(count_units(utt.text, unit))
        return Fraction(1)

    def to_dict(self) -> dict:
        d = {"chars_per_second": self.chars_per_second}
        for key in ("max_hours", "max_chars", "max_sentences"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Budget":
        return cls(
            max_hours=d.get("max_hours"),
            max_chars=d.get("max_chars"),
            max_sentences=d.get("max_sentences"),
            chars_per_second=d.get("chars_per_second", DEFAULT_CHARS_PER_SECOND),
        )


@dataclass(frozen=True)
class PlanEntry:
    id: str
    marginal_gain: int
    est_duration_s: float
    cost: float
    cumulative_hours: float
    cumulative_covered: int


@dataclass(frozen=True)
class SelectionPlan:
    selected: tuple
    covered_lf: frozenset
    total_est_hours: float
    objective: str
    stop_reason: str
    budget: dict = field(default_factory=dict)
    target_m: int | None = None
    lf_provenance: dict = field(default_factory=dict)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.selected]

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "target_m": self.target_m,
            "stop_reason": self.stop_reason,
            "budget": self.budget,
            "total_est_hours": self.total_est_hours,
            "num_selected": len(self.selected),
            "num_covered_lf": len(self.covered_lf),
            "lf_provenance": self.lf_provenance,
            "selected": [
                {
                    "id": e.id,
                    "gain": e.marginal_gain,
                    "est_duration_s": e.est_duration_s,
                    "cost": e.cost,
                    "cumulative_hours": e.cumulative_hours,
                    "cumulative_covered": e.cumulative_covered,
                }
                for e in self.selected
            ],
            "covered_lf": [list(bg) for bg in sorted(self.covered_lf)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionPlan":
        entries = tuple(
            PlanEntry(
                id=e["id"],
                marginal_gain=int(e["gain"]),
                est_duration_s=float(e["est_duration_s"]),
                cost=float(e["cost"]),
                cumulative_hours=float(e["cumulative_hours"]),
                cumulative_covered=int(e["cumulative_covered"]),
            )
            for e in d["selected"]
        )
        return cls(
            selected=entries,
            covered_lf=frozenset(tuple(bg) for bg in d.get("covered_lf", ())),
            total_est_hours=float(d["total_est_hours"]),
            objective=d["objective"],
            stop_reason=d["stop_reason"],
            budget=d.get("budget", {}),
            target_m=d.get("target_m"),
            lf_provenance=d.get("lf_provenance", {}),
        )

    def to_tsv(self) -> str:
        lines = [
            f"# objective: {self.objective}",
            f"# stop_reason: {self.stop_reason}",
            f"# total_est_hours: {self.total_est_hours:.6f}",
            "id\tgain\tcost\tcumulative_hours\tcumulative_covered",
        ]
        for e in self.selected:
            lines.append(f"{e.id}\t{e.marginal_gain}\t{e.cost:.6g}\t{e.cumulative_hours:.6f}\t{e.cumulative_covered}")
        return "\n".join(lines) + "\n"


def _lf_occurrences(texts, lf_bigrams, policy) -> list[Counter]:
    return [Counter(bg for bg in extract_bigrams(t, policy) if bg in lf_bigrams) for t in texts]


def _pool_occurrences(pool: Corpus, lf, policy, shards: int) -> list[Counter]:
    texts = pool.texts
    if shards <= 1 or len(texts) < 2:
        return _lf_occurrences(texts, lf.bigrams, policy)
    pieces = [texts[a:b] for a, b in shard_bounds(len(texts), shards)]
    workers = min(shards, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(lambda p: _lf_occurrences(p, lf.bigrams, policy), pieces))
    return [c for part in parts for c in part]


def _priority(gain: int, cost: Fraction, uid: str) -> tuple:
    # ascending order = better: best gain per cost, then larger gain, then cheaper, then id
    if cost == 0:
        return (0, -gain, -gain, cost, uid)
    return (1, -Fraction(gain) / cost, -gain, cost, uid)


def _greedy(pool, occurrences, gain_of, commit, done, budget, unit, max_repeats, covered_count):
    """Shared lazy-greedy loop. Returns (selected indices with gains, stop_reason)."""
    utts = pool.utterances
    costs = [budget.cost(u, unit) for u in utts]
    heap = []
    for i, occ in enumerate(occurrences):
        g = gain_of(occ)
        if g > 0:
            heap.append((_priority(g, costs[i], utts[i].id), i, g))
    heapq.heapify(heap)
    remaining = budget.capacity()
    repeats: Counter = Counter()
    chosen = []
    skipped_for_budget = False
    if done():
        return chosen, "target_met"
    while heap:
        _, i, stale = heapq.heappop(heap)
        g = gain_of(occurrences[i])
        if g <= 0:
            continue
        if g != stale:
            heapq.heappush(heap, (_priority(g, costs[i], utts[i].id), i, g))
            continue
        if costs[i] > remaining:
            skipped_for_budget = True
            continue
        if max_repeats is not None and any(repeats[bg] >= max_repeats for bg in occurrences[i]):
            continue
        remaining -= costs[i]
        commit(occurrences[i])
        repeats.update(occurrences[i].keys())
        chosen.append((i, g, covered_count()))
        if done():
            return chosen, "target_met"
    if skipped_for_budget:
        return chosen, "budget_exhausted"
    if len(chosen) == len(utts):
        return chosen, "pool_exhausted"
    return chosen, "no_positive_gain"


def _build_plan(pool, chosen, stop, budget, unit, objective, covered, lf, target_m=None) -> SelectionPlan:
    entries = []
    seconds = Fraction(0)
    for i, gain, n_covered in chosen:
        utt = pool.utterances[i]
        est = budget.est_seconds(utt, unit)
        seconds += est
        entries.append(
            PlanEntry(
                id=utt.id,
                marginal_gain=gain,
                est_duration_s=float(est),
                cost=float(budget.cost(utt, unit)),
                cumulative_hours=float(seconds / 3600),
                cumulative_covered=n_covered,
            )
        )
    return SelectionPlan(
        selected=tuple(entries),
        covered_lf=frozenset(covered),
        total_est_hours=float(seconds / 3600),
        objective=objective,
        stop_reason=stop,
        budget=budget.to_dict(),
        target_m=target_m,
        lf_provenance=lf.provenance_dict(),
    )


def plan_coverage_greedy(
    pool: Corpus,
    base,
    lf,
    budget: Budget,
    policy=None,
    *,
    max_repeats_per_bigram: int | None = None,
    shards: int = 1,
) -> SelectionPlan:
    """Pick pool sentences that add the most not-yet-covered LF bigrams per unit cost.

    ``base`` is the frequency table of the corpus being augmented; its LF
    bigrams count as covered from the start.
    """
    policy = policy or lf.policy
    check_policy(lf.policy, policy, base.policy)
    covered = {bg for bg in lf.bigrams if bg in base.counts}
    universe = len(lf.bigrams)
    occurrences = _pool_occurrences(pool, lf, policy, shards)

    def gain_of(occ):
        return sum(1 for bg in occ if bg not in covered)

    def commit(occ):
        covered.update(occ.keys())

    chosen, stop = _greedy(
        pool,
        occurrences,
        gain_of,
        commit,
        lambda: len(covered) == universe,
        budget,
        policy.unit,
        max_repeats_per_bigram,
        lambda: len(covered),
    )
    return _build_plan(pool, chosen, stop, budget, policy.unit, "coverage", covered, lf)


def plan_frequency_target(
    pool: Corpus,
    base,
    lf,
    target_m: int,
    budget: Budget,
    policy=None,
    *,
    max_repeats_per_bigram: int | None = None,
    shards: int = 1,
) -> SelectionPlan:
    """Pick sentences that most reduce the summed shortfall of LF bigrams below ``target_m`` occurrences."""
    if target_m < 1:
        raise LfcovError("target_m must be >= 1")
    policy = policy or lf.policy
    check_policy(lf.policy, policy, base.policy)
    counts = {bg: base.get(bg) for bg in lf.bigrams}
    deficit = {bg: max(0, target_m - n) for bg, n in counts.items()}
    open_deficits = sum(1 for d in deficit.values() if d > 0)
    occurrences = _pool_occurrences(pool, lf, policy, shards)

    def gain_of(occ):
        return sum(min(deficit[bg], n) for bg, n in occ.items())

    def commit(occ):
        nonlocal open_deficits
        for bg, n in occ.items():
            counts[bg] += n
            if deficit[bg] > 0:
                deficit[bg] = max(0, deficit[bg] - n)
                if deficit[bg] == 0:
                    open_deficits -= 1

    chosen, stop = _greedy(
        pool,
        occurrences,
        gain_of,
        commit,
        lambda: open_deficits == 0,
        budget,
        policy.unit,
        max_repeats_per_bigram,
        lambda: sum(1 for n in counts.values() if n > 0),
    )
    covered = {bg for bg, n in counts.items() if n > 0}
    return _build_plan(pool, chosen, stop, budget, policy.unit, "frequency_target", covered, lf, target_m)


def export_plan(plan: SelectionPlan, pool: Corpus, lf=None, name: str = "synthetic") -> Corpus:
    """Materialize the selected pool sentences as a synthetic-role corpus, in plan order.

    A coverage plan is refused if any entry adds no LF bigram, or, when
    ``lf`` is given, if any selected text contains no LF bigram at all.
    """
    by_id = pool.by_id()
    missing = [e.id for e in plan.selected if e.id not in by_id]
    if missing:
        raise LfcovError(f"plan refers to ids absent from pool {pool.name!r}: {', '.join(missing)}")
    if plan.objective == "coverage":
        bad = [e.id for e in plan.selected if e.marginal_gain < 1]
        if lf is not None:
            bad += [e.id for e in plan.selected if e.id not in bad and not lf_hits(by_id[e.id].text, lf)]
        if bad:
            raise LfcovError(
                "refusing to export: selected utterance(s) cover no low-frequency bigram: " + ", ".join(bad)
            )
    utts = []
    for e in plan.selected:
        u = by_id[e.id]
        extra = dict(u.extra)
        extra["est_duration_s"] = e.est_duration_s
        extra["plan_gain"] = e.marginal_gain
        utts.append(replace(u, quality="synthetic", audio_ref=None, duration_s=None, extra=extra))
    return Corpus(name=name, role="synthetic", utterances=tuple(utts))
