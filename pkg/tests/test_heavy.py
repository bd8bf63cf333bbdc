"""Opt-in checks that need model weights or a labeled corpus.

Nothing here runs by default: each test skips unless the environment names
the resources it needs.

- ``SUMFACT_NLI_MODEL``: entailment checkpoint for the ``local:`` backend
  (requires the ``models`` extra).
- ``SUMFACT_BENCHMARK_JSONL``: labeled benchmark records (validation + test
  splits) for accuracy targets.
- ``SUMFACT_CLAIM_CACHE``: extracted-claims JSON for those records, used by
  the ablation ordering check.

The accuracy targets are corpus-level numbers with a wide +/-2 point band;
the directional model checks assert orderings, not absolute scores.
"""

import os

import pytest

from sumfact import Claim, Scorer, ScoringParams, load_run_config, nli_score, run_benchmark
from sumfact.coref import HeuristicCorefBackend, with_clusters
from sumfact.formats import load_benchmark_records
from sumfact.pipeline import (
    make_claim_extractor,
    make_coref_backend,
    make_nli_backend,
    make_scorer,
    record_scorer,
)

from cases import doc_from_sentences

NLI_MODEL = os.environ.get("SUMFACT_NLI_MODEL")
BENCH_JSONL = os.environ.get("SUMFACT_BENCHMARK_JSONL")
CLAIM_CACHE = os.environ.get("SUMFACT_CLAIM_CACHE")

needs_model = pytest.mark.skipif(
    not NLI_MODEL,
    reason="set SUMFACT_NLI_MODEL to a local entailment checkpoint to run",
)
needs_corpus = pytest.mark.skipif(
    not (NLI_MODEL and BENCH_JSONL),
    reason="set SUMFACT_NLI_MODEL and SUMFACT_BENCHMARK_JSONL to run the "
    "labeled benchmark",
)
needs_full_stack = pytest.mark.skipif(
    not (NLI_MODEL and BENCH_JSONL and CLAIM_CACHE),
    reason="set SUMFACT_NLI_MODEL, SUMFACT_BENCHMARK_JSONL and "
    "SUMFACT_CLAIM_CACHE to run the ablation ordering",
)


def _model_backend():
    config = load_run_config(None, {"nli_backend": f"local:{NLI_MODEL}"})
    return make_nli_backend(config)


def _run_benchmark(mode, protocol="per_split"):
    overrides = {
        "nli_backend": f"local:{NLI_MODEL}",
        "coref_backend": "heuristic",
        "mode": mode,
        "workers": 4,
    }
    if CLAIM_CACHE:
        overrides["claim_backend"] = f"cache:{CLAIM_CACHE}"
    config = load_run_config(None, overrides)
    records = load_benchmark_records(BENCH_JSONL)
    backend = make_nli_backend(config)
    scorer = make_scorer(config, backend)
    extractor = make_claim_extractor(config)
    coref_backend = make_coref_backend(config)
    score_fn = record_scorer(scorer, extractor, config.mode, coref_backend)
    return run_benchmark(
        records, score_fn, protocol, bootstrap_seed=None, workers=config.workers
    )


@needs_corpus
def test_labeled_benchmark_accuracy(criterion):
    """Full pipeline lands near its published corpus-level accuracy."""
    with criterion("labeled-benchmark-accuracy"):
        per_split = _run_benchmark("full", "per_split")
        assert 100 * per_split.average_balanced_accuracy == pytest.approx(
            71.6, abs=2.0
        )
        pooled = _run_benchmark("full", "single_threshold")
        assert 100 * pooled.average_balanced_accuracy == pytest.approx(72.7, abs=2.0)


@needs_full_stack
def test_ablation_ordering(criterion):
    """Each pipeline stage adds accuracy on the labeled corpus."""
    with criterion("ablation-ordering"):
        averages = {
            mode: _run_benchmark(mode).average_balanced_accuracy
            for mode in ("nli_sent", "nli_claim", "nli_coref", "full")
        }
        assert (
            averages["nli_sent"]
            < averages["nli_claim"]
            < averages["nli_coref"]
            < averages["full"]
        )


@needs_model
def test_model_entailment_directionality():
    backend = _model_backend()
    premise = "The striker scored two goals on Saturday."
    entailed = nli_score(premise, "The striker scored.", backend)
    contradicted = nli_score(premise, "The striker did not score.", backend)
    unrelated = nli_score(premise, "The coach retired in 2010.", backend)
    assert entailed > 0.5
    assert contradicted < 0.0
    assert entailed > unrelated


@needs_model
def test_model_coref_substitution_helps():
    # "Maria Lopez" is the only name, so the heuristic must attach "She" to it.
    doc = doc_from_sentences(
        "d-coref",
        [
            "Maria Lopez joined the company in 2019.",
            "She resigned from the company last week.",
        ],
    )
    doc = with_clusters(doc, HeuristicCorefBackend())
    assert doc.coref_clusters, "heuristic should link 'She' to 'Maria Lopez'"
    scorer = Scorer(_model_backend(), ScoringParams())
    claim = Claim("s-coref", 0, "Maria Lopez resigned from the company.")
    sentence_score, _ = scorer.score_sentences(doc, claim)
    coref_score, aligned = scorer.score_coref(doc, claim)
    assert coref_score > sentence_score
    assert aligned.granularity == "coref_sentence"
