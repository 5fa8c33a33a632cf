"""Command-line interface: ``lfcov stats|bigrams|lfset|compare|plan|eval|report``.

Exit status: 0 on success, 1 for usage errors, 2 for data or validation errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from lfcov import evaluation as ev
from lfcov.bigrams import BigramPolicy, LfSet, build_lf_set, count_bigrams, percentile_threshold
from lfcov.config import load_config
from lfcov.corpus import corpus_stats, dump_manifest, load_corpus, merge_corpora
from lfcov.errors import LfcovError
from lfcov.metrics import Scenario, compare_scenarios, scenario_metrics
from lfcov.planner import Budget, export_plan, plan_coverage_greedy, plan_frequency_target
from lfcov.render import Table, comparison_table, dumps_json, quality_table, stats_table
from lfcov.report import FIG1_FILE, PLAN_FILE, Fig1Series, build_report
from lfcov.text import CHAR_CLASSES, NormalizationPolicy

log = logging.getLogger("lfcov")

FORMATS = ("delimited", "structured", "human-readable")
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- argument helpers -------------------------------------------------------------


def _skip_classes(value: str) -> frozenset:
    names = {s.strip() for s in value.split(",") if s.strip()}
    unknown = names - set(CHAR_CLASSES)
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown class(es) {', '.join(sorted(unknown))}; choose from {', '.join(CHAR_CLASSES)}")
    return frozenset(names)


def _fraction(value: str) -> float:
    try:
        p = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None
    if not 0 < p < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return p


def _positive_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not an integer") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _positive_float(value: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def _formats(value: str) -> tuple:
    names = tuple(s.strip() for s in value.split(",") if s.strip())
    bad = [n for n in names if n not in FORMATS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {', '.join(FORMATS)}")
    return names


def _common(p: argparse.ArgumentParser, out=True) -> None:
    g = p.add_argument_group("text and bigram policy")
    g.add_argument("--policy-unit", choices=("codepoint", "grapheme_cluster"), default="codepoint")
    g.add_argument("--skip", type=_skip_classes, default=frozenset(), metavar="CLASSES",
                   help=f"comma-separated classes excluded from pairing ({', '.join(CHAR_CLASSES)})")
    g.add_argument("--cross-token", action="store_true", help="let a pair span a skipped character")
    g.add_argument("--collapse-whitespace", action="store_true")
    g.add_argument("--lowercase", action="store_true")
    g.add_argument("--shards", type=_positive_int, default=1, help="internal counting shards")
    if out:
        p.add_argument("--out", type=Path, help="directory for output files")
        p.add_argument("--format", type=_formats, default=("delimited", "structured"),
                       help="files to write under --out: delimited, structured, human-readable")
    p.add_argument("--config", help="flat key=value config file (else $LFCOV_CONFIG)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lfcov", description="Low-frequency character-bigram coverage analytics.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("stats", help="per-corpus statistics table")
    p.add_argument("manifests", nargs="+")
    _common(p)

    p = sub.add_parser("bigrams", help="count bigrams over the union of corpora")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--top", type=_positive_int, default=20, help="rows printed to stdout")
    _common(p)

    p = sub.add_parser("lfset", help="derive the low-frequency bigram set from a reference corpus")
    p.add_argument("references", nargs="+")
    p.add_argument("--threshold", type=_positive_int, help="absolute count threshold t")
    p.add_argument("--percentile", type=_fraction, help="derive t as this nearest-rank percentile")
    _common(p)

    p = sub.add_parser("compare", help="score augmentation scenarios against a baseline")
    p.add_argument("--base", required=True)
    p.add_argument("--add", action="append", default=[], metavar="[LABEL=]METHOD:PATH",
                   help="one scenario per flag; METHOD is proximal, multilingual, asr or synthetic")
    p.add_argument("--lfset", required=True)
    p.add_argument("--target-script")
    p.add_argument("--script-policy", choices=("same_script_only", "all_additions"), default="same_script_only")
    p.add_argument("--chars-per-second", type=_positive_float, default=12.0)
    p.add_argument("--strict-hours", action="store_true", help="refuse to estimate missing durations")
    _common(p)

    p = sub.add_parser("plan", help="greedy synthetic-sentence selection under a budget")
    p.add_argument("--pool", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--lfset", required=True)
    b = p.add_mutually_exclusive_group()
    b.add_argument("--budget-hours", type=_positive_float)
    b.add_argument("--budget-chars", type=_positive_int)
    b.add_argument("--budget-sentences", type=_positive_int)
    p.add_argument("--chars-per-second", type=_positive_float, default=12.0)
    p.add_argument("--objective", choices=("coverage", "frequency-target"), default="coverage")
    p.add_argument("--target", type=_positive_int, help="per-bigram occurrence target (frequency-target)")
    p.add_argument("--max-repeats", type=_positive_int, help="cap selected sentences per LF bigram")
    _common(p)

    p = sub.add_parser("eval", help="aggregate listening tests and quality measures")
    esub = p.add_subparsers(dest="eval_command", parser_class=_Parser, required=True)
    q = esub.add_parser("ir", help="intelligibility rate from utterance_id,bigram,rater_id,label")
    q.add_argument("ratings")
    _common(q)
    q = esub.add_parser("mos", help="mean opinion score from utterance_id,rater_id,score")
    q.add_argument("ratings")
    _common(q)
    q = esub.add_parser("quality", help="per-method means of utterance_id,s_sim,snr,c50")
    q.add_argument("rows")
    q.add_argument("--grouping", required=True, help="utterance_id,method CSV")
    _common(q)
    q = esub.add_parser("ssim", help="speaker similarity rows from two embedding files")
    q.add_argument("--reference", required=True)
    q.add_argument("--synthesized", required=True)
    _common(q)

    p = sub.add_parser("report", help="consolidated report from a directory of artifacts")
    p.add_argument("artifacts", type=Path)
    _common(p)
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                yield sp
                yield from _subparsers(sp)


def _config_path(argv) -> str | None:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _apply_config(parser, config: dict) -> None:
    known = set()
    for sp in _subparsers(parser):
        dests = {a.dest for a in sp._actions}
        known |= dests
        sp.set_defaults(**{k: v for k, v in config.items() if k in dests})
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")


# -- shared plumbing --------------------------------------------------------------


def _policies(args):
    norm = NormalizationPolicy(collapse_whitespace=args.collapse_whitespace, lowercase=args.lowercase)
    skip = args.skip if isinstance(args.skip, frozenset) else _skip_classes(str(args.skip))
    return norm, BigramPolicy(unit=args.policy_unit, skip_classes=skip, cross_token=bool(args.cross_token))


def _emit(args, stem: str, table: Table | None, structured, text: str) -> None:
    """Write requested formats under --out and print the human-readable view."""
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        if "delimited" in args.format and table is not None:
            (args.out / f"{stem}.tsv").write_text(table.to_tsv(), encoding="utf-8")
        if "structured" in args.format and structured is not None:
            (args.out / f"{stem}.json").write_text(dumps_json(structured), encoding="utf-8")
        if "human-readable" in args.format:
            (args.out / f"{stem}.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _load_lfset(path) -> LfSet:
    return LfSet.load(path)


# -- commands -------------------------------------------------------------------------


def cmd_stats(args) -> int:
    norm, _ = _policies(args)
    rows = [corpus_stats(load_corpus(p, norm)) for p in args.manifests]
    table = stats_table(rows)
    _emit(args, "stats", table, {"rows": [r.to_dict() for r in rows]}, table.to_text())
    return EXIT_OK


def cmd_bigrams(args) -> int:
    norm, policy = _policies(args)
    corpora = [load_corpus(p, norm, role="reference_text") for p in args.manifests]
    merged = merge_corpora(corpora, name="+".join(c.name for c in corpora), dedup=True)
    table = count_bigrams(merged, policy, shards=args.shards)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        if "delimited" in args.format:
            (args.out / "bigrams.tsv").write_text(table.to_tsv(), encoding="utf-8")
        if "structured" in args.format:
            (args.out / "bigrams.json").write_text(table.to_json(), encoding="utf-8")
    head = list(table.counts.items())[: args.top]
    view = Table(("first", "second", "count"), tuple((repr(a), repr(b), str(n)) for (a, b), n in head))
    sys.stdout.write(f"{len(table)} distinct bigrams, {table.total_pairs} pairs ({policy.describe()})\n\n")
    sys.stdout.write(view.to_text())
    return EXIT_OK


def cmd_lfset(args) -> int:
    if args.threshold is None and args.percentile is None:
        raise UsageError("give --threshold or --percentile")
    norm, policy = _policies(args)
    corpora = [load_corpus(p, norm, role="reference_text") for p in args.references]
    name = "+".join(c.name for c in corpora)
    reference = count_bigrams(merge_corpora(corpora, name=name, dedup=True), policy, shards=args.shards)
    if args.threshold is not None:
        if args.percentile is not None:
            log.warning("both --threshold and --percentile given; using absolute threshold t=%d", args.threshold)
        lf = build_lf_set(reference, args.threshold)
    else:
        t = percentile_threshold(reference, args.percentile)
        lf = build_lf_set(reference, t, percentile_p=args.percentile)
    text = lf.dumps()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "lfset.txt").write_text(text, encoding="utf-8")
        sys.stdout.write(
            f"LF set: {len(lf)} of {len(reference)} reference bigrams below t={lf.threshold_t}"
            + (f" (percentile {lf.percentile_p})" if lf.percentile_p is not None else "")
            + "\n"
        )
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_add(spec: str):
    label = None
    if "=" in spec.split(":", 1)[0]:
        label, spec = spec.split("=", 1)
    method, sep, path = spec.partition(":")
    if not sep or not path:
        raise UsageError(f"--add expects [LABEL=]METHOD:PATH, got {spec!r}")
    return label, method, path


def cmd_compare(args) -> int:
    lf = _load_lfset(args.lfset)
    norm, policy = _policies(args)
    if policy != lf.policy:
        log.info("using the LF set's bigram policy (%s)", lf.policy.describe())
        policy = lf.policy
    if args.script_policy == "same_script_only" and not args.target_script:
        raise UsageError("--target-script is required with --script-policy same_script_only")
    base = load_corpus(args.base, norm, role="baseline")
    base_table = count_bigrams(base, policy, shards=args.shards)
    role_for = {"proximal": "proximal", "multilingual": "multilingual", "asr": "asr", "synthetic": "synthetic"}
    scenarios = [Scenario("baseline", base, (), args.target_script, args.script_policy)]
    for spec in args.add:
        label, method, path = _parse_add(spec)
        if method not in role_for:
            raise UsageError(f"unknown method {method!r} in --add")
        corpus = load_corpus(path, norm, role=role_for[method])
        scenarios.append(Scenario(label or corpus.name, base, ((corpus, method),), args.target_script, args.script_policy))
    rows = [
        scenario_metrics(
            s, lf, policy, strict_hours=args.strict_hours, chars_per_second=args.chars_per_second,
            shards=args.shards, base_table=base_table,
        )
        for s in scenarios
    ]
    table = compare_scenarios(rows)
    series = Fig1Series.from_metrics(rows)
    structured = table.to_dict()
    structured["policy"] = policy.to_dict()
    rendered = comparison_table(table)
    text = rendered.to_text() + "\n" + series.table().to_text()
    _emit(args, "compare", rendered, structured, text)
    if args.out is not None:
        if "delimited" in args.format:
            (args.out / "fig1.tsv").write_text(series.table().to_tsv(), encoding="utf-8")
        if "structured" in args.format:
            (args.out / FIG1_FILE).write_text(dumps_json(series.to_dict()), encoding="utf-8")
    return EXIT_OK


def cmd_plan(args) -> int:
    lf = _load_lfset(args.lfset)
    norm, _ = _policies(args)
    policy = lf.policy
    if args.budget_hours is not None:
        budget = Budget(max_hours=args.budget_hours, chars_per_second=args.chars_per_second)
    elif args.budget_chars is not None:
        budget = Budget(max_chars=args.budget_chars, chars_per_second=args.chars_per_second)
    elif args.budget_sentences is not None:
        budget = Budget(max_sentences=args.budget_sentences, chars_per_second=args.chars_per_second)
    else:
        raise UsageError("give one of --budget-hours, --budget-chars, --budget-sentences")
    pool = load_corpus(args.pool, norm, role="pool")
    base = count_bigrams(load_corpus(args.base, norm, role="baseline"), policy, shards=args.shards)
    if args.objective == "frequency-target":
        if args.target is None:
            raise UsageError("--objective frequency-target needs --target")
        plan = plan_frequency_target(pool, base, lf, args.target, budget, policy,
                                     max_repeats_per_bigram=args.max_repeats, shards=args.shards)
    else:
        plan = plan_coverage_greedy(pool, base, lf, budget, policy,
                                    max_repeats_per_bigram=args.max_repeats, shards=args.shards)
    synthetic = export_plan(plan, pool, lf if plan.objective == "coverage" else None)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        if "structured" in args.format:
            (args.out / PLAN_FILE).write_text(plan.dumps(), encoding="utf-8")
        if "delimited" in args.format:
            (args.out / "plan.tsv").write_text(plan.to_tsv(), encoding="utf-8")
        dump_manifest(synthetic, args.out / "synthetic.jsonl")
    sys.stdout.write(
        f"selected {len(plan.selected)} sentences, {plan.total_est_hours:.2f} h estimated, "
        f"{len(plan.covered_lf)} LF bigrams covered, stop: {plan.stop_reason}\n"
    )
    sys.stdout.write(plan.to_tsv())
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.eval_command == "ir":
        res = ev.intelligibility_rate(ev.read_ir_ratings(args.ratings))
        d = res.to_dict()
        per = Table(("rater", "rate", "n"), tuple((k, f"{float(v):.4f}", str(res.rater_counts[k])) for k, v in res.per_rater.items()))
        agree = "n/a" if res.agreement is None else f"{float(res.agreement):.4f}"
        text = f"pooled IR: {float(res.pooled):.4f} over {res.n} labels\nfull agreement: {agree}\n\n" + per.to_text()
        _emit(args, "eval_ir", per, d, text)
    elif args.eval_command == "mos":
        res = ev.mos(ev.read_mos_ratings(args.ratings))
        table = Table(("mean", "ci95_halfwidth", "n", "ci_method"), ((f"{res.mean:.2f}", f"{res.ci95_halfwidth:.2f}", str(res.n), res.ci_method),))
        text = f"MOS {res.mean:.2f} +/- {res.ci95_halfwidth:.2f} (n={res.n}, {res.ci_method} 95% CI)\n"
        _emit(args, "eval_mos", table, res.to_dict(), text)
    elif args.eval_command == "quality":
        rows = ev.read_quality_rows(args.rows)
        summary = ev.quality_summary(rows, ev.read_grouping(args.grouping))
        table = quality_table(summary)
        _emit(args, "eval_quality", table, {"methods": [m.to_dict() for m in summary]}, table.to_text())
    else:
        rows = ev.speaker_similarity(ev.read_embeddings(args.reference), ev.read_embeddings(args.synthesized))
        table = Table(("utterance_id", "s_sim", "snr", "c50"), tuple((r.utterance_id, repr(r.s_sim), "", "") for r in rows))
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "ssim.csv").write_text(table.to_tsv().replace("\t", ","), encoding="utf-8")
        sys.stdout.write(table.to_text())
    return EXIT_OK


def cmd_report(args) -> int:
    text = build_report(args.artifacts)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "bigrams": cmd_bigrams,
    "lfset": cmd_lfset,
    "compare": cmd_compare,
    "plan": cmd_plan,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, load_config(_config_path(argv)))
    except UsageError as exc:
        sys.stderr.write(f"lfcov: error: {exc}\n")
        return EXIT_USAGE
    except LfcovError as exc:
        sys.stderr.write(f"lfcov: error: {exc}\n")
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="lfcov: %(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"lfcov: error: {exc}\n")
        return EXIT_USAGE
    except LfcovError as exc:
        sys.stderr.write(f"lfcov: error: {exc}\n")
        return EXIT_DATA


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
