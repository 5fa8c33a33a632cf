import json
import random

import pytest

from lfcov.corpus import Corpus, Utterance


def make_corpus(texts, name="c", role="baseline", prefix=None, **fields):
    prefix = prefix if prefix is not None else name
    utts = tuple(Utterance(id=f"{prefix}-{i}", text=t, **fields) for i, t in enumerate(texts))
    return Corpus(name=name, role=role, utterances=utts)


def naive_count(texts):
    """Quadratic recount straight from the definition: for every candidate
    bigram, walk every position of every text and test equality."""
    candidates = set()
    for t in texts:
        for j in range(len(t) - 1):
            candidates.add((t[j], t[j + 1]))
    counts = {}
    for b in candidates:
        n = 0
        for t in texts:
            for j in range(len(t) - 1):
                if (t[j], t[j + 1]) == b:
                    n += 1
        counts[b] = n
    return counts


def random_texts(rng: random.Random, max_utts=50, alphabet_size=8, max_len=12, min_len=1):
    alphabet = [chr(ord("a") + i) for i in range(alphabet_size)]
    n = rng.randint(0, max_utts)
    return [
        "".join(rng.choice(alphabet) for _ in range(rng.randint(min_len, max_len)))
        for _ in range(n)
    ]


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def rng():
    return random.Random(1234)


# Six-manifest toy workspace. The reference holds frequent pairs from "abab"
# and six pairs seen once each, so t=5 makes those six the LF set. The
# baseline covers one of them, the added corpora cover a few more, and the
# pool can cover the remaining five cheaply.
TOY_LF = {("x", "q"), ("z", "j"), ("v", "k"), ("w", "y"), ("f", "h"), ("g", "m")}


def toy_workspace(root):
    root.mkdir(parents=True, exist_ok=True)
    ref = root / "reference.txt"
    ref.write_text("abab abab\n" * 30 + "xq\nzj\nvk\nwy\nfh\ngm\n", encoding="utf-8")

    def utts(prefix, texts, seconds, **fields):
        return [
            {"id": f"{prefix}-{i}", "text": t, "duration_s": seconds, **fields}
            for i, t in enumerate(texts)
        ]

    paths = {"reference": ref}
    paths["base"] = write_jsonl(root / "base.jsonl", utts(
        "b", ["abab", "xq ab"], 1800.0, speaker_id="s1", language="xx", script="Latn", quality="studio"))
    paths["proximal"] = write_jsonl(root / "proximal.jsonl", utts(
        "p", ["ab zj", "abab", "ba ab"], 2400.0, speaker_id="s2", language="yy", script="Latn", quality="studio"))
    paths["asr"] = write_jsonl(root / "asr.jsonl", utts(
        "a", ["ab vk", "baba"], 2700.0, speaker_id="s3", language="xx", script="Latn", quality="field"))
    paths["multilingual"] = write_jsonl(root / "multilingual.jsonl", utts(
        "m", ["абаб", "ваба", "баба"], 3600.0, speaker_id="s4", language="ru", script="Cyrl", quality="studio"))
    paths["pool"] = write_jsonl(root / "pool.jsonl", [
        {"id": "s-0", "script": "Latn", "text": "zj vk"},
        {"id": "s-1", "script": "Latn", "text": "wy fh"},
        {"id": "s-2", "script": "Latn", "text": "gm"},
        {"id": "s-3", "script": "Latn", "text": "abab"},
        {"id": "s-4", "script": "Latn", "text": "xq ab"},
        {"id": "s-5", "script": "Latn", "text": "fh gm wy"},
        {"id": "s-6", "script": "Latn", "text": "ab ab ab ab ab ab vk"},
    ])
    return paths


_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.failed:
        num, _, label = name[len("test_criterion_"):].partition("_")
        prev = _criteria.get(int(num), (label, True))[1]
        _criteria[int(num)] = (label.replace("_", " "), prev and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        label, ok = _criteria[num]
        terminalreporter.write_line(f"criterion {num:2d}  {'PASS' if ok else 'FAIL'}  {label}")
