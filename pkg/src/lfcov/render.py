"""Table rendering: tab-delimited, JSON and aligned plain text.

Best values are reported as data (a ``best`` column naming the columns
where the row holds the extreme), never as styling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from lfcov.corpus import StatsRow
from lfcov.evaluation import QUALITY_METRICS, MethodQuality
from lfcov.metrics import ComparisonTable


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: tuple  # tuples of already-formatted cells

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(r) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        widths = [len(c) for c in self.columns]
        for row in self.rows:
            widths = [max(w, len(cell)) for w, cell in zip(widths, row)]

        def fmt(cells):
            return "  ".join(cell.ljust(w) for cell, w in zip(cells, widths)).rstrip()

        out = [fmt(self.columns), fmt(["-" * w for w in widths])]
        out += [fmt(r) for r in self.rows]
        return "\n".join(out) + "\n"


def fmt2(x) -> str:
    return "" if x is None else f"{float(x):.2f}"


def _best_columns(values_by_col: dict, pick: dict) -> list[set]:
    """For each row index, the set of column names where it attains the extreme."""
    n = len(next(iter(values_by_col.values()))) if values_by_col else 0
    best = [set() for _ in range(n)]
    for col, values in values_by_col.items():
        present = [v for v in values if v is not None]
        if not present:
            continue
        target = pick.get(col, max)(present)
        for i, v in enumerate(values):
            if v is not None and v == target:
                best[i].add(col)
    return best


def stats_table(rows: Sequence[StatsRow]) -> Table:
    columns = ("corpus", "studio", "duration_h", "speakers", "languages", "utterances", "durations", "best")
    # durations are compared at display precision so ties look like ties
    best = _best_columns(
        {
            "duration_h": [round(r.total_hours, 2) for r in rows],
            "speakers": [r.num_speakers for r in rows],
            "languages": [r.num_languages for r in rows],
        },
        {},
    )
    out = []
    for r, b in zip(rows, best):
        out.append(
            (
                r.corpus_name,
                "yes" if r.studio else "no",
                fmt2(r.total_hours),
                str(r.num_speakers),
                str(r.num_languages),
                str(r.num_utterances),
                "complete" if r.durations_complete else "partial",
                ",".join(c for c in columns if c in b),
            )
        )
    return Table(columns, tuple(out))


def comparison_table(table: ComparisonTable) -> Table:
    columns = ("scenario", "delta_f", "delta_g_rel", "missing_after", "hours_added", "hours_source", "best")
    out = []
    for r in table.rows:
        best = [c for c in ("delta_f", "delta_g_rel", "missing_after", "hours_added") if r.scenario in table.flags.get(c, ())]
        out.append(
            (
                r.scenario,
                str(r.delta_f),
                "n/a" if r.delta_g_rel is None else fmt2(r.delta_g_rel),
                str(r.missing_after),
                fmt2(r.hours_added),
                "estimated" if r.hours_estimated else "manifest",
                ",".join(best),
            )
        )
    return Table(columns, tuple(out))


def quality_table(summary: Sequence[MethodQuality]) -> Table:
    columns = ("method", "s_sim", "snr", "c50", "n_s_sim", "n_snr", "n_c50", "best")
    best = _best_columns(
        {m: [None if q.means[m] is None else round(q.means[m], 2) for q in summary] for m in QUALITY_METRICS},
        {},
    )
    out = []
    for q, b in zip(summary, best):
        out.append(
            (q.method,)
            + tuple(fmt2(q.means[m]) for m in QUALITY_METRICS)
            + tuple(str(q.counts[m]) for m in QUALITY_METRICS)
            + (",".join(m for m in QUALITY_METRICS if m in b),)
        )
    return Table(columns, tuple(out))


def dumps_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=1, sort_keys=False) + "\n"
