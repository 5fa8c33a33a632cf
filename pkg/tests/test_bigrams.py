import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfcov.bigrams import (
    BigramPolicy,
    FrequencyTable,
    LfSet,
    build_lf_set,
    count_bigrams,
    escape_unit,
    extract_bigrams,
    missing_lf,
    percentile_threshold,
    unescape_unit,
)
from lfcov.corpus import merge_corpora
from lfcov.errors import LfcovError, PolicyMismatchError
from lfcov.text import char_class

from conftest import make_corpus, naive_count, random_texts

SKIP_WS = BigramPolicy(skip_classes=frozenset({"whitespace"}))


def oracle_pairs(text, skip_classes=(), cross_token=False):
    """Pairing rule written out longhand for code points."""
    out = []
    if cross_token:
        kept = [c for c in text if char_class(c) not in skip_classes]
        for j in range(len(kept) - 1):
            out.append((kept[j], kept[j + 1]))
        return out
    for j in range(len(text) - 1):
        a, b = text[j], text[j + 1]
        if char_class(a) in skip_classes or char_class(b) in skip_classes:
            continue
        out.append((a, b))
    return out


def test_extract_examples():
    assert extract_bigrams("aba") == [("a", "b"), ("b", "a")]
    assert extract_bigrams("a") == []
    assert extract_bigrams("") == []
    assert extract_bigrams("ab cd", SKIP_WS) == [("a", "b"), ("c", "d")]
    crossing = BigramPolicy(skip_classes=frozenset({"whitespace"}), cross_token=True)
    assert extract_bigrams("ab cd", crossing) == [("a", "b"), ("b", "c"), ("c", "d")]


def test_extract_grapheme_clusters():
    policy = BigramPolicy(unit="grapheme_cluster")
    # consonant + vowel sign form one cluster
    assert extract_bigrams("किता", policy) == [("कि", "ता")]
    assert extract_bigrams("किता") == [("क", "ि"), ("ि", "त"), ("त", "ा")]


def test_count_hand_example():
    table = count_bigrams(make_corpus(["aba", "ab"]))
    assert table.counts == {("a", "b"): 2, ("b", "a"): 1}
    assert table.total_pairs == 3


def test_count_empty():
    table = count_bigrams(make_corpus([]))
    assert table.counts == {} and table.total_pairs == 0


def test_count_matches_naive_oracle(rng):
    for _ in range(300):
        texts = random_texts(rng)
        table = count_bigrams(texts)
        assert table.counts == naive_count(texts)
        assert table.total_pairs == sum(max(len(t) - 1, 0) for t in texts)


@pytest.mark.parametrize("cross_token", [False, True])
@pytest.mark.parametrize("classes", [{"whitespace"}, {"whitespace", "punctuation", "digit"}])
def test_skip_classes_match_oracle(rng, cross_token, classes):
    alphabet = "ab c,d1. "
    policy = BigramPolicy(skip_classes=frozenset(classes), cross_token=cross_token)
    for _ in range(200):
        texts = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 15))) for _ in range(rng.randint(0, 20))]
        expected = Counter()
        for t in texts:
            expected.update(oracle_pairs(t, classes, cross_token))
        assert count_bigrams(texts, policy).counts == dict(expected)
        for t in texts:
            assert extract_bigrams(t, policy) == oracle_pairs(t, classes, cross_token)


def test_grapheme_counting_matches_extraction(rng):
    policy = BigramPolicy(unit="grapheme_cluster", skip_classes=frozenset({"whitespace"}))
    pieces = ["क", "ि", "त", "ा", "ब", " ", "्", "ष", "e", "́"]
    for _ in range(100):
        texts = ["".join(rng.choice(pieces) for _ in range(rng.randint(1, 12))) for _ in range(rng.randint(0, 15))]
        expected = Counter()
        for t in texts:
            expected.update(extract_bigrams(t, policy))
        assert count_bigrams(texts, policy).counts == dict(expected)


def test_large_alphabet_uses_sparse_path():
    rng = random.Random(5)
    chars = [chr(0x4E00 + i) for i in range(9000)]
    texts = ["".join(rng.choice(chars) for _ in range(30)) for _ in range(400)]
    assert count_bigrams(texts).counts == dict(Counter(p for t in texts for p in zip(t, t[1:])))


@pytest.mark.parametrize("shards", [1, 2, 3, 8])
@pytest.mark.parametrize("chunk_units", [1, 7, 10_000])
def test_sharding_and_chunking_do_not_change_counts(rng, shards, chunk_units):
    texts = random_texts(rng, max_utts=60)
    assert count_bigrams(texts, shards=shards, chunk_units=chunk_units).counts == naive_count(texts)


def test_additivity_over_disjoint_merge(rng):
    a = make_corpus(random_texts(rng), name="A")
    b = make_corpus(random_texts(rng), name="B", role="proximal")
    merged = count_bigrams(merge_corpora([a, b], "AB"))
    assert merged.counts == (count_bigrams(a) + count_bigrams(b)).counts


@settings(max_examples=100)
@given(st.lists(st.text(alphabet="abcd ", min_size=1, max_size=10), max_size=20), st.randoms())
def test_order_invariance(texts, r):
    shuffled = list(texts)
    r.shuffle(shuffled)
    assert count_bigrams(texts) == count_bigrams(shuffled)


def test_table_rejects_zero_counts():
    with pytest.raises(LfcovError):
        FrequencyTable({("a", "b"): 0})


def test_table_round_trips():
    table = count_bigrams(make_corpus(["a\tb c\\d\"e", "क़ि  ", "x y"], name="weird"))
    assert FrequencyTable.from_tsv(table.to_tsv()) == table
    assert FrequencyTable.from_json(table.to_json()) == table
    rows = table.to_tsv().splitlines()[5:]
    counts = [int(r.split("\t")[2]) for r in rows]
    assert counts == sorted(counts, reverse=True)


@pytest.mark.parametrize("unit", ["a", " ", "\t", "\\", '"', " ", "क़", "\x00", "\U000e0001"])
def test_escape_round_trip(unit):
    esc = escape_unit(unit)
    assert "\t" not in esc and "\n" not in esc and " " not in esc
    assert unescape_unit(esc) == unit


# -- percentile threshold ----------------------------------------------------------


def table_from_counts(values):
    return FrequencyTable({(chr(0x61 + i // 26), chr(0x61 + i % 26)): v for i, v in enumerate(values)})


def test_percentile_documented_multiset():
    assert percentile_threshold(table_from_counts(range(1, 11)), 0.4) == 4


def test_percentile_all_equal():
    table = table_from_counts([5, 5, 5])
    for p in (0.1, 0.4, 0.99):
        t = percentile_threshold(table, p)
        assert t == 5
        assert len(build_lf_set(table, t)) == 0


def test_percentile_single():
    assert percentile_threshold(table_from_counts([17]), 0.4) == 17


def test_percentile_uses_exact_rank():
    # 0.7 * 10 is 7.000000000000001 in binary floating point; the rank must still be 7
    assert percentile_threshold(table_from_counts(range(1, 11)), 0.7) == 7


def test_percentile_errors():
    with pytest.raises(LfcovError):
        percentile_threshold(FrequencyTable({}), 0.4)
    with pytest.raises(LfcovError):
        percentile_threshold(table_from_counts([1]), 1.0)


@settings(max_examples=300)
@given(st.lists(st.integers(1, 60), min_size=1, max_size=200), st.floats(0.01, 0.99))
def test_percentile_fraction_bound(values, p):
    table = table_from_counts(values)
    t = percentile_threshold(table, p)
    lf = build_lf_set(table, t)
    n = len(values)
    assert len(lf) <= math.ceil(p * n) - 1 or len(lf) == 0
    assert len(lf) / n <= p


# -- LF sets -------------------------------------------------------------------------


def test_build_lf_set_filter():
    ref = FrequencyTable({("a", "b"): 1, ("b", "a"): 50, ("c", "d"): 39}, corpus_name="T")
    lf = build_lf_set(ref, 40)
    assert lf.bigrams == {("a", "b"), ("c", "d")}
    assert lf.threshold_t == 40 and lf.reference_name == "T"
    assert len(build_lf_set(ref, 1)) == 0


@settings(max_examples=200)
@given(st.dictionaries(st.tuples(st.sampled_from("abcde"), st.sampled_from("abcde")), st.integers(1, 100)), st.integers(1, 120))
def test_lf_members_are_below_threshold(counts, t):
    ref = FrequencyTable(counts)
    lf = build_lf_set(ref, t)
    assert lf.bigrams <= set(ref.counts)
    assert all(ref.get(b) < t for b in lf.bigrams)
    assert all(b in lf.bigrams for b, n in ref.counts.items() if n < t)


def test_lf_set_round_trip():
    ref = FrequencyTable({("a", " "): 3, ("\t", "b"): 2, ("x", "y"): 90}, corpus_name="T")
    lf = build_lf_set(ref, 40, percentile_p=0.4)
    assert LfSet.loads(lf.dumps()) == lf
    text = lf.dumps()
    assert "# threshold_t: 40" in text and "# percentile_p: 0.4" in text
    no_p = build_lf_set(ref, 40)
    assert "percentile_p" not in no_p.dumps()


def test_lf_set_bad_file():
    with pytest.raises(LfcovError):
        LfSet.loads("a\tb\n")
    with pytest.raises(LfcovError):
        LfSet.loads("# threshold_t: 4\n# size: 2\na\tb\n")


def test_missing_lf():
    lf = LfSet(40, frozenset({("a", "b"), ("c", "d"), ("e", "f")}))
    assert missing_lf(FrequencyTable({("a", "b"): 3, ("z", "z"): 1}), lf) == 2
    assert missing_lf(FrequencyTable({("a", "b"): 1, ("c", "d"): 1, ("e", "f"): 1}), lf) == 0
    assert missing_lf(FrequencyTable({}), lf) == 3
    with pytest.raises(PolicyMismatchError):
        missing_lf(FrequencyTable({}, policy=SKIP_WS), lf)


def test_policy_validation():
    with pytest.raises(LfcovError):
        BigramPolicy(unit="word")
    with pytest.raises(LfcovError):
        BigramPolicy(skip_classes=frozenset({"vowels"}))
    p = BigramPolicy(unit="grapheme_cluster", skip_classes=frozenset({"digit", "whitespace"}), cross_token=True)
    assert BigramPolicy.from_dict(p.to_dict()) == p
