"""Low-frequency character-bigram coverage analytics for speech corpora."""

from lfcov.bigrams import (
    BigramPolicy,
    FrequencyTable,
    LfSet,
    build_lf_set,
    count_bigrams,
    extract_bigrams,
    missing_lf,
    percentile_threshold,
)
from lfcov.corpus import (
    Corpus,
    NormalizationPolicy,
    StatsRow,
    Utterance,
    corpus_stats,
    load_manifest,
    merge_corpora,
    normalize_text,
)
from lfcov.errors import LfcovError
from lfcov.evaluation import (
    cosine_similarity,
    intelligibility_rate,
    mos,
    quality_summary,
)
from lfcov.metrics import (
    Scenario,
    ScenarioMetrics,
    compare_scenarios,
    coverage_delta,
    growth,
    relative_growth,
    scenario_metrics,
)
from lfcov.planner import (
    Budget,
    SelectionPlan,
    estimate_duration,
    export_plan,
    plan_coverage_greedy,
    plan_frequency_target,
)

__version__ = "0.1.0"

__all__ = [
    "BigramPolicy",
    "Budget",
    "Corpus",
    "FrequencyTable",
    "LfSet",
    "LfcovError",
    "NormalizationPolicy",
    "Scenario",
    "ScenarioMetrics",
    "SelectionPlan",
    "StatsRow",
    "Utterance",
    "build_lf_set",
    "compare_scenarios",
    "corpus_stats",
    "cosine_similarity",
    "count_bigrams",
    "coverage_delta",
    "estimate_duration",
    "export_plan",
    "extract_bigrams",
    "growth",
    "intelligibility_rate",
    "load_manifest",
    "merge_corpora",
    "missing_lf",
    "mos",
    "normalize_text",
    "percentile_threshold",
    "plan_coverage_greedy",
    "plan_frequency_target",
    "quality_summary",
    "relative_growth",
    "scenario_metrics",
]
