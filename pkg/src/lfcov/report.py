"""Missing-LF vs. hours series and the consolidated run report."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from lfcov.corpus import StatsRow
from lfcov.errors import LfcovError
from lfcov.evaluation import QUALITY_METRICS, MethodQuality
from lfcov.metrics import ComparisonTable, ScenarioMetrics
from lfcov.render import Table, comparison_table, fmt2, quality_table, stats_table

STATS_FILE = "stats.json"
COMPARE_FILE = "compare.json"
FIG1_FILE = "fig1.json"
PLAN_FILE = "plan.json"
EVAL_FILES = ("eval_ir.json", "eval_mos.json", "eval_quality.json")


@dataclass(frozen=True)
class Fig1Series:
    """Per-scenario (missing LF count, training hours) pairs, ready for any plotting tool."""

    labels: tuple
    missing_lf: tuple
    hours: tuple
    hours_estimated: tuple = ()

    def __post_init__(self):
        if not len(self.labels) == len(self.missing_lf) == len(self.hours):
            raise LfcovError("Fig1Series needs one missing count and one hours value per label")
        if len(set(self.labels)) != len(self.labels):
            raise LfcovError("Fig1Series labels must be unique")
        if any(n < 0 for n in self.missing_lf):
            raise LfcovError("missing LF counts cannot be negative")

    @classmethod
    def from_metrics(cls, rows: Sequence[ScenarioMetrics]) -> "Fig1Series":
        return cls(
            labels=tuple(r.scenario for r in rows),
            missing_lf=tuple(r.missing_after for r in rows),
            hours=tuple(r.total_hours for r in rows),
            hours_estimated=tuple(r.hours_estimated for r in rows),
        )

    def to_dict(self) -> dict:
        return {
            "series": [
                {"label": lab, "missing_lf": n, "hours": h, "hours_estimated": est}
                for lab, n, h, est in zip(self.labels, self.missing_lf, self.hours, self.hours_estimated or (False,) * len(self.labels))
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Fig1Series":
        s = d["series"]
        return cls(
            tuple(e["label"] for e in s),
            tuple(int(e["missing_lf"]) for e in s),
            tuple(float(e["hours"]) for e in s),
            tuple(bool(e.get("hours_estimated", False)) for e in s),
        )

    def table(self) -> Table:
        rows = [
            (lab, str(n), fmt2(h) + ("~" if est else ""))
            for lab, n, h, est in zip(self.labels, self.missing_lf, self.hours, self.hours_estimated or (False,) * len(self.labels))
        ]
        return Table(("scenario", "missing_lf", "hours"), tuple(rows))


def _load_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LfcovError(f"{path}: corrupted artifact ({exc})") from None


def _section(title: str, body: str) -> str:
    return f"== {title} ==\n\n{body.rstrip()}\n"


def _provenance_lines(prov: dict) -> str:
    if not prov:
        return ""
    policy = prov.get("policy", {})
    skips = ",".join(policy.get("skip_classes", [])) or "none"
    parts = [
        f"LF set: reference={prov.get('reference', '')} t={prov.get('threshold_t')}",
        f"size={prov.get('size')}",
    ]
    if prov.get("percentile_p") is not None:
        parts.append(f"p={prov['percentile_p']}")
    line = " ".join(parts)
    line += f"\nBigram policy: unit={policy.get('unit')} skip={skips} cross_token={str(policy.get('cross_token', False)).lower()}"
    return line + "\n\n"


def _guard(path: Path, build):
    try:
        return build(_load_json(path))
    except LfcovError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise LfcovError(f"{path}: corrupted artifact (unexpected structure: {exc!r})") from None


def build_report(artifacts: str | Path) -> str:
    """Assemble every known artifact in ``artifacts`` into one plain-text report.

    Sections always appear, in a fixed order; absent artifacts yield a
    placeholder line. No timestamps, so identical inputs give identical bytes.
    """
    root = Path(artifacts)
    if not root.is_dir():
        raise LfcovError(f"{root}: not a directory")
    sections = []

    p = root / STATS_FILE
    if p.exists():
        rows = _guard(p, lambda d: [StatsRow.from_dict(r) for r in d["rows"]])
        body = stats_table(rows).to_text()
    else:
        body = "(no artifacts)"
    sections.append(_section("Corpus statistics", body))

    p = root / COMPARE_FILE
    if p.exists():
        table = _guard(p, ComparisonTable.from_dict)
        body = _provenance_lines(table.lf_provenance) + comparison_table(table).to_text()
    else:
        body = "(no artifacts)"
    sections.append(_section("Scenario comparison", body))

    p = root / PLAN_FILE
    if p.exists():
        body = _guard(p, _plan_summary)
    else:
        body = "(no artifacts)"
    sections.append(_section("Synthetic selection plan", body))

    sections.append(_section("Evaluation", _eval_body(root)))

    p = root / FIG1_FILE
    if p.exists():
        series = _guard(p, Fig1Series.from_dict)
        body = "Missing LF bigrams vs. training hours (~ marks estimated hours)\n\n" + series.table().to_text()
    else:
        body = "(no artifacts)"
    sections.append(_section("Missing LF vs. hours series", body))

    return "\n".join(sections)


def _plan_summary(d: dict) -> str:
    budget = d["budget"]
    limit = ", ".join(f"{k}={v}" for k, v in budget.items())
    lines = [
        _provenance_lines(d.get("lf_provenance", {})).rstrip(),
        f"objective: {d['objective']}" + (f" (target_m={d['target_m']})" if d.get("target_m") else ""),
        f"budget: {limit}",
        f"selected: {d['num_selected']} sentences, {d['total_est_hours']:.2f} h (estimated)",
        f"LF bigrams covered: {d['num_covered_lf']}",
        f"stop reason: {d['stop_reason']}",
    ]
    sel = d["selected"]
    if sel:
        rows = [
            (e["id"], str(e["gain"]), f"{e['cumulative_hours']:.4f}", str(e["cumulative_covered"]))
            for e in sel[:20]
        ]
        table = Table(("id", "gain", "cum_hours", "cum_covered"), tuple(rows)).to_text()
        lines += ["", table.rstrip()]
        if len(sel) > 20:
            lines.append(f"... {len(sel) - 20} more")
    return "\n".join(line for line in lines if line is not None).lstrip("\n") + "\n"


def _eval_body(root: Path) -> str:
    parts = []
    p = root / "eval_ir.json"
    if p.exists():
        def ir(d):
            per = ", ".join(f"{k}={v:.4f}" for k, v in d["per_rater"].items())
            agree = "n/a" if d["agreement"] is None else f"{d['agreement']:.4f}"
            return (
                f"Intelligibility rate: pooled={d['pooled']:.4f} (n={d['n']}, items={d['n_items']})\n"
                f"  per rater: {per}\n  full agreement: {agree}"
            )

        parts.append(_guard(p, ir))
    p = root / "eval_mos.json"
    if p.exists():
        parts.append(
            _guard(
                p,
                lambda d: f"MOS: {d['mean']:.2f} +/- {d['ci95_halfwidth']:.2f} (95% CI, {d['ci_method']}, n={d['n']})",
            )
        )
    p = root / "eval_quality.json"
    if p.exists():
        def qual(d):
            rows = [MethodQuality(r["method"], r["means"], r["counts"]) for r in d["methods"]]
            for r in rows:
                if set(r.means) != set(QUALITY_METRICS):
                    raise KeyError("means")
            return "Automated quality (per-method means)\n\n" + quality_table(rows).to_text()

        parts.append(_guard(p, qual))
    return "\n\n".join(parts) if parts else "(no artifacts)"
