"""Acceptance checks. Run with ``pytest tests/test_acceptance.py``; a
summary prints one PASS/FAIL line per criterion at the end of the run."""

import itertools
import json
import math
import random
import subprocess
import sys
import textwrap
import time
from fractions import Fraction

import pytest

from conftest import TOY_LF, naive_count, random_texts, toy_workspace
from lfcov.bigrams import BigramPolicy, FrequencyTable, LfSet, build_lf_set, count_bigrams, lf_hits, percentile_threshold
from lfcov.cli import main
from lfcov.corpus import Corpus, Utterance, corpus_stats, load_manifest
from lfcov.evaluation import IntelligibilityRating, MosRating, QualityRow, cosine_similarity, intelligibility_rate, mos, quality_summary
from lfcov.metrics import METHODS, Scenario, scenario_metrics
from lfcov.planner import Budget, export_plan, plan_coverage_greedy, plan_frequency_target
from lfcov.render import quality_table, stats_table
from lfcov.text import NormalizationPolicy

POLICY = BigramPolicy()
EMPTY = FrequencyTable({})


def corpus(texts, name, role="baseline", scripts=None):
    scripts = scripts or ["Latn"] * len(texts)
    return Corpus(name, role, tuple(
        Utterance(f"{name}-{i}", t, duration_s=float(len(t)), script=s) for i, (t, s) in enumerate(zip(texts, scripts))
    ))


def test_criterion_01_counting_matches_naive_recount():
    rng = random.Random(20240601)
    start = time.perf_counter()
    for _ in range(1000):
        texts = random_texts(rng, max_utts=50, alphabet_size=rng.randint(1, 8))
        table = count_bigrams(texts, POLICY)
        assert dict(table.counts) == naive_count(texts)
        assert table.total_pairs == sum(max(0, len(t) - 1) for t in texts)
    assert time.perf_counter() - start < 30


def oracle_metrics(base_texts, additions, lf, target, script_policy):
    contributing = [
        t for texts, scripts in additions for t, s in zip(texts, scripts)
        if script_policy == "all_additions" or s == target
    ]
    before = naive_count(base_texts)
    after = naive_count(list(base_texts) + contributing)
    df = sum(1 for b in lf if b in after) - sum(1 for b in lf if b in before)
    mass = sum(before[b] for b in lf if b in before)
    dg = sum(after[b] for b in lf if b in after) - mass
    return df, dg, (Fraction(dg, mass) if mass else None)


def test_criterion_02_metric_formulas_match_definitions():
    rng = random.Random(99)
    alphabet = "abcde"
    all_pairs = [(x, y) for x in alphabet for y in alphabet]
    for trial in range(500):
        base_texts = random_texts(rng, max_utts=10, alphabet_size=5, max_len=8)
        base_texts = base_texts or ["ab"]
        additions = []
        for k in range(rng.randint(0, 3)):
            texts = random_texts(rng, max_utts=8, alphabet_size=5, max_len=8)
            scripts = [rng.choice(["Latn", "Latn", "Cyrl"]) for _ in texts]
            additions.append((texts, scripts))
        lf_pairs = frozenset(rng.sample(all_pairs, rng.randint(0, len(all_pairs))))
        lf = LfSet(40, lf_pairs, "T")
        script_policy = rng.choice(["same_script_only", "all_additions"])
        scenario = Scenario(
            f"s{trial}",
            corpus(base_texts, "base"),
            tuple((corpus(t, f"add{k}", scripts=s), rng.choice(METHODS)) for k, (t, s) in enumerate(additions)),
            "Latn",
            script_policy,
        )
        got = scenario_metrics(scenario, lf)
        df, dg, rel = oracle_metrics(base_texts, additions, lf_pairs, "Latn", script_policy)
        assert (got.delta_f, got.delta_g) == (df, dg)
        if rel is None:
            assert got.delta_g_rel is None
        else:
            assert got.delta_g_rel == rel
            assert abs(float(got.delta_g_rel) - rel) < Fraction(1, 10**12)


def test_criterion_03_percentile_contract():
    rng = random.Random(3)
    for _ in range(500):
        n = rng.randint(1, 60)
        counts = {(chr(0x4E00 + i), "x"): rng.randint(1, 50) for i in range(n)}
        table = FrequencyTable(counts)
        p = rng.choice([0.1, 0.25, 0.4, 0.5, 0.75, 0.9, rng.random() or 0.5])
        t = percentile_threshold(table, p)
        assert t == sorted(counts.values())[math.ceil(Fraction(repr(p)) * n) - 1]
        lf = build_lf_set(table, t, percentile_p=p)
        assert Fraction(len(lf), n) <= Fraction(repr(p))
    documented = FrequencyTable({(chr(0x61 + i), "z"): i + 1 for i in range(10)})
    assert percentile_threshold(documented, 0.4) == 4
    assert len(build_lf_set(documented, 4)) == 3


def token(i):
    return chr(0x61 + 2 * i) + chr(0x62 + 2 * i)


def pool_from_sets(sets):
    return Corpus("pool", "pool", tuple(
        Utterance(f"S{k + 1}", "|".join(token(i) for i in sorted(s)) or "|") for k, s in enumerate(sets)
    ))


def test_criterion_04_greedy_approximation():
    rng = random.Random(4)
    bound = 1 - 1 / math.e
    for _ in range(500):
        n_lf = rng.randint(1, 10)
        sets = [set(rng.sample(range(n_lf), rng.randint(0, n_lf))) for _ in range(rng.randint(1, 12))]
        k = rng.randint(1, 4)
        lf = LfSet(40, frozenset((token(i)[0], token(i)[1]) for i in range(n_lf)), "T")
        plan = plan_coverage_greedy(pool_from_sets(sets), EMPTY, lf, Budget(max_sentences=k))
        optimum = max(
            len(set().union(*combo)) for r in range(0, min(k, len(sets)) + 1) for combo in itertools.combinations(sets, r)
        )
        assert len(plan.selected) <= k
        assert len(plan.covered_lf) >= bound * optimum

    b = [(token(i)[0], token(i)[1]) for i in range(3)]
    plan = plan_coverage_greedy(pool_from_sets([{0, 1}, {1, 2}, {2}]), EMPTY, LfSet(40, frozenset(b), "T"), Budget(max_sentences=2))
    assert plan.ids == ["S1", "S2"] and plan.covered_lf == frozenset(b)


def test_criterion_05_exported_sentences_all_cover_lf():
    rng = random.Random(5)
    checked = 0
    for trial in range(200):
        reference = count_bigrams(random_texts(rng, max_utts=40, alphabet_size=6, max_len=10), POLICY)
        if not len(reference):
            continue
        lf = build_lf_set(reference, rng.randint(1, 6))
        pool = corpus(random_texts(rng, max_utts=40, alphabet_size=8, max_len=10, min_len=1), "pool", role="pool")
        base = count_bigrams(random_texts(rng, max_utts=10, alphabet_size=6), POLICY)
        budget = rng.choice([Budget(max_chars=rng.randint(1, 200)), Budget(max_sentences=rng.randint(1, 20))])
        plan = plan_coverage_greedy(pool, base, lf, budget, max_repeats_per_bigram=rng.choice([None, 1, 2]))
        synthetic = export_plan(plan, pool, lf)
        for utt in synthetic:
            assert lf_hits(utt.text, lf), utt.id
            assert utt.quality == "synthetic"
        checked += len(synthetic)
    assert checked > 500


@pytest.fixture(scope="module")
def big_fixture():
    rng = random.Random(6)
    alphabet = [" "] * 3 + [chr(c) for c in range(0x0915, 0x0939)] + [chr(c) for c in range(0x093E, 0x094D)]
    texts = ["".join(rng.choice(alphabet) for _ in range(rng.randint(5, 40))) for _ in range(10_000)]
    return corpus(texts, "fixture", role="pool")


def test_criterion_06_shards_are_byte_identical(big_fixture):
    tables = [count_bigrams(big_fixture, POLICY, shards=s) for s in (1, 2, 8)]
    assert len({t.to_tsv() for t in tables}) == 1
    assert len({t.to_json() for t in tables}) == 1
    skip = BigramPolicy(skip_classes=frozenset({"whitespace"}), cross_token=True)
    assert len({count_bigrams(big_fixture, skip, shards=s).to_tsv() for s in (1, 2, 8)}) == 1

    reference = tables[0]
    lf = build_lf_set(reference, percentile_threshold(reference, 0.4), percentile_p=0.4)
    base = count_bigrams(list(big_fixture.texts[:200]), POLICY)
    plans = {plan_coverage_greedy(big_fixture, base, lf, Budget(max_chars=3000), shards=s).dumps() for s in (1, 2, 8)}
    assert len(plans) == 1
    plans = {plan_frequency_target(big_fixture, base, lf, 2, Budget(max_hours=0.05), shards=s).dumps() for s in (1, 2, 8)}
    assert len(plans) == 1


CORPUS_STATS_FIXTURE = [
    # name, studio, hours, speakers, languages
    ("I", True, 20.16, 2, 1),
    ("P", True, 80.11, 2, 1),
    ("A", False, 72.74, 368, 1),
    ("M1", True, 224.57, 27, 14),
    ("M2", True, 852.17, 260, 15),
    ("S", False, 27.67, 1, 1),
]

QUALITY_FIXTURE = [
    ("Baseline", 0.73, 67.03, 59.60),
    ("Proximal", 0.73, 67.63, 59.72),
    ("ASR-Enhanced", 0.72, 67.50, 59.62),
    ("Multilingual", 0.67, 66.81, 59.67),
    ("Scaling Multilingual", 0.72, 68.04, 59.71),
    ("Synthetic", 0.72, 67.27, 59.53),
]


def test_criterion_07_table_fixtures_render_cell_for_cell():
    rows = []
    for name, studio, hours, spk, langs in CORPUS_STATS_FIXTURE:
        n = max(spk, langs)
        utts = tuple(
            Utterance(f"{name}-{i}", "ab", duration_s=hours * 3600 / n, speaker_id=f"spk{i % spk}",
                      language=f"l{i % langs}", quality="studio" if studio else "field")
            for i in range(n)
        )
        rows.append(corpus_stats(Corpus(name, "baseline", utts)))
    rendered = stats_table(rows)
    for (name, studio, hours, spk, langs), cells in zip(CORPUS_STATS_FIXTURE, rendered.rows):
        assert cells[:5] == (name, "yes" if studio else "no", f"{hours:.2f}", str(spk), str(langs))
    best = {cells[0]: cells[-1] for cells in rendered.rows}
    assert best == {"I": "", "P": "", "A": "speakers", "M1": "", "M2": "duration_h,languages", "S": ""}

    quality = [QualityRow(f"u{i}", s, snr, c50) for i, (_, s, snr, c50) in enumerate(QUALITY_FIXTURE)]
    grouping = {f"u{i}": m for i, (m, *_) in enumerate(QUALITY_FIXTURE)}
    rendered = quality_table(quality_summary(quality, grouping, methods=[m for m, *_ in QUALITY_FIXTURE]))
    for (m, s, snr, c50), cells in zip(QUALITY_FIXTURE, rendered.rows):
        assert cells[:4] == (m, f"{s:.2f}", f"{snr:.2f}", f"{c50:.2f}")
    best = {cells[0]: cells[-1] for cells in rendered.rows}
    assert best["Proximal"] == "s_sim,c50" and best["Scaling Multilingual"] == "snr"


def test_criterion_08_eval_arithmetic():
    ratings = [IntelligibilityRating(f"u{i}", "ab", "r1", int(i < 74)) for i in range(100)]
    assert intelligibility_rate(ratings).pooled == Fraction(74, 100)
    assert f"{mos([MosRating('u1', 'r1', 3), MosRating('u2', 'r1', 5)]).mean:.2f}" == "4.00"
    assert abs(cosine_similarity([1, 2, 3], [4, 5, 6]) - 0.974631846) < 1e-9


PERF_SCRIPT = textwrap.dedent("""
    import json, resource, sys, time
    import numpy as np
    from lfcov.bigrams import BigramPolicy, count_bigrams

    rng = np.random.default_rng(0)
    alphabet = np.array([0x20] * 6 + list(range(0x0905, 0x0939)) + list(range(0x093E, 0x094D)), dtype=np.uint32)
    n, length = 1_000_000, 50
    blob = alphabet[rng.integers(0, len(alphabet), size=n * length)].tobytes().decode("utf-32-le")
    texts = [blob[i * length:(i + 1) * length] for i in range(n)]
    del blob
    start = time.perf_counter()
    table = count_bigrams(texts, BigramPolicy())
    elapsed = time.perf_counter() - start
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    json.dump({"seconds": elapsed, "peak_bytes": peak, "units": n * length, "pairs": table.total_pairs}, sys.stdout)
""")


def test_criterion_09_counting_throughput():
    proc = subprocess.run([sys.executable, "-c", PERF_SCRIPT], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    result = json.loads(proc.stdout)
    print(f"counted {result['units']} units in {result['seconds']:.2f} s, peak {result['peak_bytes'] / 2**20:.0f} MiB")
    assert result["pairs"] == 49_000_000
    assert result["seconds"] <= 10
    assert result["peak_bytes"] <= 2 * 2**30


def test_criterion_10_toy_pipeline(tmp_path):
    ws = toy_workspace(tmp_path / "data")
    out = tmp_path / "run"
    assert main(["lfset", str(ws["reference"]), "--threshold", "5", "--out", str(out)]) == 0
    lf = out / "lfset.txt"
    budget_chars = 13
    assert main(["plan", "--pool", str(ws["pool"]), "--base", str(ws["base"]), "--lfset", str(lf),
                 "--budget-chars", str(budget_chars), "--out", str(out)]) == 0
    argv = ["compare", "--base", str(ws["base"]), "--lfset", str(lf), "--target-script", "Latn", "--out", str(out)]
    for method in ("proximal", "asr", "multilingual"):
        argv += ["--add", f"{method}:{ws[method]}"]
    argv += ["--add", f"synthetic:{out / 'synthetic.jsonl'}"]
    assert main(argv) == 0
    series = {s["label"]: s for s in json.loads((out / "fig1.json").read_text())["series"]}
    assert set(series) == {"baseline", "proximal", "asr", "multilingual", "synthetic"}

    # independent recount of each scenario's missing LF bigrams and hours
    norm = NormalizationPolicy()
    base = load_manifest(ws["base"], norm)
    synthetic = load_manifest(out / "synthetic.jsonl", norm)
    expected = {}
    for label, extra in [("baseline", None), ("proximal", ws["proximal"]), ("asr", ws["asr"]),
                         ("multilingual", ws["multilingual"]), ("synthetic", None)]:
        add = synthetic if label == "synthetic" else (load_manifest(extra, norm) if extra else None)
        utts = list(add) if add is not None else []
        texts = list(base.texts) + [u.text for u in utts if u.script == "Latn"]
        seconds = sum(u.duration_s for u in base) + sum(
            u.duration_s if u.duration_s is not None else len(u.text) / 12 for u in utts
        )
        expected[label] = (len(TOY_LF - set(naive_count(texts))), seconds / 3600)
    for label, (missing, hours) in expected.items():
        assert series[label]["missing_lf"] == missing
        assert series[label]["hours"] == pytest.approx(hours, abs=1e-9)

    syn = series["synthetic"]
    peers = [s for lab, s in series.items() if lab != "synthetic" and s["hours"] <= syn["hours"]]
    assert peers, "the instance must include a scenario of no greater size"
    assert all(syn["missing_lf"] < s["missing_lf"] for s in peers)
    assert syn["missing_lf"] == min(s["missing_lf"] for s in series.values())

    # exhaustive check: no affordable pool subset covers more of what the base lacks
    pool = load_manifest(ws["pool"], norm)
    lacking = TOY_LF - set(naive_count(base.texts))
    best = 0
    for r in range(len(pool) + 1):
        for combo in itertools.combinations(pool, r):
            if sum(len(u.text) for u in combo) <= budget_chars:
                best = max(best, len(lacking & set(naive_count([u.text for u in combo]))))
    plan = json.loads((out / "plan.json").read_text())
    assert plan["selected"][-1]["cumulative_covered"] - len(TOY_LF - lacking) == best == len(lacking)
