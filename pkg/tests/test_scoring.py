"""Staged claim scoring: per-stage operators, gating, tie-breaks, chunking."""

import json
import logging
import random
import threading

import pytest

from sumfact import (
    Claim,
    MockEntailmentBackend,
    OversizedPremise,
    PremiseBudget,
    Scorer,
    ScoringParams,
    Substitution,
    coref_variants,
    nli_score,
)
from sumfact.scoring import AlignedSpan

import oracles
from cases import doc_from_sentences, random_case, summary_from_sentences


def claim(text, sid="s1", index=0):
    return Claim(sid, index, text)


def make_scorer(backend=None, **params):
    return Scorer(backend or MockEntailmentBackend(), ScoringParams(**params))


class TestScoringParams:
    def test_defaults(self):
        p = ScoringParams()
        assert (p.window_size, p.gate_threshold, p.max_coref_variants) == (5, 0.8, 20)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScoringParams(window_size=0)
        with pytest.raises(ValueError):
            ScoringParams(gate_threshold=1.5)
        with pytest.raises(ValueError):
            ScoringParams(max_coref_variants=0)


class TestAlignedSpan:
    def test_sentence_span_must_be_single(self):
        with pytest.raises(ValueError):
            AlignedSpan("sentence", 0, 1, "x")

    def test_substitution_only_on_coref(self):
        with pytest.raises(ValueError):
            AlignedSpan("window", 0, 1, "x", Substitution("a", "b"))

    def test_document_starts_at_zero(self):
        with pytest.raises(ValueError):
            AlignedSpan("document", 1, 3, "x")

    def test_range_ordering(self):
        with pytest.raises(ValueError):
            AlignedSpan("window", 3, 1, "x")


class TestNliScore:
    def test_matches_backend_score(self, mock_backend):
        value = nli_score("alpha beta", "alpha gamma", mock_backend)
        assert value == mock_backend.entail("alpha beta", "alpha gamma").score == 0.5


class TestSentenceStage:
    def test_best_and_argmax(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        assert scorer.score_sentences(doc, claim("gamma delta.")) == (1.0, 1)

    def test_tie_goes_to_lowest_index(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "alpha beta."])
        assert scorer.score_sentences(doc, claim("alpha.")) == (1.0, 0)


VUNIPOLA_SENTS = ["Billy Vunipola has been ruled out.", "The player will return soon."]
VUNIPOLA_CLUSTERS = [[(0, 0, 14), (1, 0, 10)]]  # "Billy Vunipola" <-> "The player"


def vunipola_doc():
    return doc_from_sentences("d", VUNIPOLA_SENTS, VUNIPOLA_CLUSTERS)


class TestCorefVariants:
    def test_single_substitution_per_variant(self):
        doc = vunipola_doc()
        variants = coref_variants(doc, 0, ScoringParams())
        assert variants == [
            (
                "The player has been ruled out.",
                Substitution("Billy Vunipola", "The player"),
            )
        ]
        variants = coref_variants(doc, 1, ScoringParams())
        assert variants == [
            (
                "Billy Vunipola will return soon.",
                Substitution("The player", "Billy Vunipola"),
            )
        ]

    def test_ordered_by_mention_start(self):
        doc = doc_from_sentences(
            "d",
            ["alpha beta gamma delta.", "epsilon zeta."],
            [
                [(0, 11, 16), (1, 0, 7)],  # "gamma" <-> "epsilon"
                [(0, 0, 5), (1, 8, 12)],  # "alpha" <-> "zeta"
            ],
        )
        variants = coref_variants(doc, 0, ScoringParams())
        # Mention at offset 0 ("alpha") comes before the one at offset 11.
        assert [v[1] for v in variants] == [
            Substitution("alpha", "zeta"),
            Substitution("gamma", "epsilon"),
        ]

    def test_cap_respected(self):
        doc = doc_from_sentences(
            "d",
            ["alpha beta.", "gamma delta.", "epsilon zeta."],
            [[(0, 0, 5), (1, 0, 5), (2, 0, 7)]],
        )
        capped = coref_variants(doc, 0, ScoringParams(max_coref_variants=1))
        assert len(capped) == 1
        full = coref_variants(doc, 0, ScoringParams())
        assert len(full) == 2  # two other surfaces for the one local mention

    def test_duplicate_surfaces_skipped(self):
        doc = doc_from_sentences(
            "d", ["Smith ran.", "Smith hid."], [[(0, 0, 5), (1, 0, 5)]]
        )
        assert coref_variants(doc, 0, ScoringParams()) == []

    def test_no_local_mentions(self):
        doc = doc_from_sentences(
            "d", ["alpha beta.", "gamma delta.", "plain text."],
            [[(0, 0, 5), (1, 0, 5)]],
        )
        assert coref_variants(doc, 2, ScoringParams()) == []

    def test_index_bounds(self):
        with pytest.raises(ValueError):
            coref_variants(vunipola_doc(), 5, ScoringParams())


class TestCorefStage:
    def test_substitution_wins(self, scorer):
        # claim tokens {the,player,was,ruled,out}: anchor s0 scores 0.4, the
        # substituted variant "The player has been ruled out." scores 0.8.
        score, span = scorer.score_coref(vunipola_doc(), claim("The player was ruled out."))
        assert score == pytest.approx(0.8)
        assert span.granularity == "coref_sentence"
        assert (span.sentence_start, span.sentence_end) == (0, 0)
        assert span.premise_text == "The player has been ruled out."
        assert span.substitution == Substitution("Billy Vunipola", "The player")

    def test_original_wins_ties(self, scorer):
        # Variant does not change the token overlap; the original must win.
        doc = doc_from_sentences(
            "d", ["alpha beta.", "gamma beta."], [[(0, 6, 10), (1, 6, 10)]]
        )
        score, span = scorer.score_coref(doc, claim("alpha."))
        assert score == 1.0
        assert span.granularity == "sentence"
        assert span.substitution is None

    def test_no_clusters_degrades_to_sentence_stage(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        score, span = scorer.score_coref(doc, claim("gamma."))
        assert score == 1.0
        assert span.granularity == "sentence"
        assert (span.sentence_start, span.sentence_end) == (1, 1)

    def test_never_below_sentence_score(self, scorer):
        # All variants are worse; the original stays in the candidate set.
        doc = vunipola_doc()
        c = claim("Billy Vunipola was ruled out.")
        sent_score, _ = scorer.score_sentences(doc, c)
        coref_score, _ = scorer.score_coref(doc, c)
        assert coref_score >= sent_score


class TestWindowStage:
    def test_window_max_and_start(self, scorer):
        doc = doc_from_sentences("d", ["aa bb.", "cc dd.", "ee ff.", "gg hh."])
        assert scorer.score_window(doc, claim("ff gg."), 2) == (1.0, 2)

    def test_window_tie_lowest_start(self, scorer):
        doc = doc_from_sentences("d", ["aa bb.", "cc dd.", "ee ff."])
        assert scorer.score_window(doc, claim("cc."), 2) == (1.0, 0)

    def test_window_of_one_equals_sentence_stage(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta.", "alpha gamma."])
        for text in ("alpha.", "gamma delta.", "missing words."):
            assert scorer.score_window(doc, claim(text), 1) == scorer.score_sentences(
                doc, claim(text)
            )

    def test_oversized_window_clamped_to_document(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        assert scorer.score_window(doc, claim("alpha gamma."), 99) == (1.0, 0)

    def test_bad_window_length(self, scorer):
        with pytest.raises(ValueError):
            scorer.score_window(doc_from_sentences("d", ["alpha."]), claim("alpha."), 0)


class TestMultiStage:
    def test_document_wins_ties(self, scorer):
        doc = doc_from_sentences("d", ["aa bb.", "cc dd.", "ee ff.", "gg hh."])
        score, span = scorer.score_multi(doc, claim("ff gg."))
        assert score == 1.0
        assert span.granularity == "document"
        assert (span.sentence_start, span.sentence_end) == (0, 3)

    def test_window_wins_strictly(self):
        # "not" in sentence 0 poisons every premise containing it.
        scorer = make_scorer(window_size=2)
        doc = doc_from_sentences("d", ["not aa.", "cc dd.", "ee ff.", "gg hh."])
        score, span = scorer.score_multi(doc, claim("ff gg."))
        assert score == 1.0
        assert span.granularity == "window"
        assert (span.sentence_start, span.sentence_end) == (2, 3)
        assert span.premise_text == "ee ff. gg hh."

    def test_single_sentence_document(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta."])
        score, span = scorer.score_multi(doc, claim("alpha."))
        assert score == 1.0
        assert span.granularity == "document"
        assert (span.sentence_start, span.sentence_end) == (0, 0)


class TestGatedPipeline:
    def test_gate_pass_stops_at_coref(self):
        scorer = make_scorer(gate_threshold=0.8)
        verdict = scorer.score_claim(vunipola_doc(), claim("The player was ruled out."))
        assert verdict.stage == "coref"
        assert verdict.score == pytest.approx(0.8)
        assert set(verdict.sub_scores) == {"sentence", "coref"}
        assert scorer.backend_calls["window"] == 0
        assert scorer.backend_calls["document"] == 0

    def test_gate_boundary_is_inclusive(self):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        scorer = make_scorer(gate_threshold=1.0)
        verdict = scorer.score_claim(doc, claim("alpha beta."))
        assert verdict.stage == "coref"
        assert verdict.score == 1.0

    def test_gate_miss_substitutes_even_when_lower(self):
        # coref score 2/3 but the whole document flips to contradiction.
        scorer = make_scorer(window_size=5, gate_threshold=0.8)
        doc = doc_from_sentences("d", ["alpha beta gamma.", "delta epsilon not zeta."])
        verdict = scorer.score_claim(doc, claim("alpha beta zeta."))
        assert verdict.stage == "multi_granularity"
        assert verdict.score == pytest.approx(-1.0)
        assert verdict.sub_scores["sentence"] == pytest.approx(2 / 3)
        assert verdict.sub_scores["coref"] == pytest.approx(2 / 3)
        assert verdict.sub_scores["window"] == pytest.approx(-1.0)
        assert verdict.sub_scores["document"] == pytest.approx(-1.0)

    def test_monotone_gate_keeps_better_coref(self):
        backend = MockEntailmentBackend()
        scorer = Scorer(
            backend, ScoringParams(window_size=5, gate_threshold=0.8), monotone_gate=True
        )
        doc = doc_from_sentences("d", ["alpha beta gamma.", "delta epsilon not zeta."])
        verdict = scorer.score_claim(doc, claim("alpha beta zeta."))
        assert verdict.stage == "coref"
        assert verdict.score == pytest.approx(2 / 3)
        # The multi sub-scores were still computed and reported.
        assert verdict.sub_scores["document"] == pytest.approx(-1.0)

    def test_monotone_gate_never_lowers_the_default_score(self):
        rng = random.Random(13)
        for i in range(40):
            doc, claims, params = random_case(rng, i)
            plain = Scorer(MockEntailmentBackend(), ScoringParams(**params))
            monotone = Scorer(
                MockEntailmentBackend(), ScoringParams(**params), monotone_gate=True
            )
            for c in claims:
                assert monotone.score_claim(doc, c).score >= plain.score_claim(doc, c).score

    def test_verdict_score_consistency(self):
        rng = random.Random(99)
        for i in range(60):
            doc, claims, params = random_case(rng, i)
            scorer = Scorer(MockEntailmentBackend(), ScoringParams(**params))
            for c in claims:
                v = scorer.score_claim(doc, c)
                assert v.sub_scores["coref"] >= v.sub_scores["sentence"]
                if v.stage == "coref":
                    assert v.score == v.sub_scores["coref"]
                    assert v.score >= params["gate_threshold"]
                    assert set(v.sub_scores) == {"sentence", "coref"}
                else:
                    assert v.stage == "multi_granularity"
                    assert v.score == max(v.sub_scores["window"], v.sub_scores["document"])


class TestBudgetChunking:
    def hyp(self):
        return claim("gggg zzzz.")

    def chunked_doc(self):
        return doc_from_sentences(
            "d", ["aaaa bbbb.", "cccc dddd.", "eeee ffff.", "gggg hhhh."]
        )

    def test_chunk_layout(self):
        backend = MockEntailmentBackend(budget=PremiseBudget(32))
        scorer = Scorer(backend, ScoringParams())
        chunks = scorer._window_premises(self.chunked_doc(), 0, 4, self.hyp().text)
        assert [(start, length) for start, length, _ in chunks] == [(0, 2), (1, 2), (2, 2)]
        assert chunks[2][2] == "eeee ffff. gggg hhhh."

    def test_within_budget_is_single_premise(self):
        backend = MockEntailmentBackend(budget=PremiseBudget(200))
        scorer = Scorer(backend, ScoringParams())
        chunks = scorer._window_premises(self.chunked_doc(), 0, 4, self.hyp().text)
        assert len(chunks) == 1 and chunks[0][1] == 4

    def test_oversized_single_sentence_raises(self):
        backend = MockEntailmentBackend(budget=PremiseBudget(16))
        scorer = Scorer(backend, ScoringParams())
        doc = doc_from_sentences("d", ["this single sentence is far too long."])
        with pytest.raises(OversizedPremise, match="sentence 0"):
            scorer._window_premises(doc, 0, 1, "hhhh.")

    def test_chunked_document_reports_window_granularity(self):
        backend = MockEntailmentBackend(budget=PremiseBudget(32))
        scorer = Scorer(backend, ScoringParams(window_size=1, gate_threshold=0.8))
        verdict = scorer.score_claim(self.chunked_doc(), self.hyp())
        assert verdict.stage == "multi_granularity"
        assert verdict.sub_scores["document"] == pytest.approx(0.5)
        # The winning premise is a chunk, so the span tells the truth instead
        # of claiming whole-document coverage.
        assert verdict.aligned.granularity == "window"
        assert (verdict.aligned.sentence_start, verdict.aligned.sentence_end) == (2, 3)
        assert verdict.aligned.premise_text == "eeee ffff. gggg hhhh."

    def test_chunking_never_changes_in_budget_results(self):
        # A giant budget and no budget must agree everywhere.
        rng = random.Random(4)
        for i in range(20):
            doc, claims, params = random_case(rng, i)
            free = Scorer(MockEntailmentBackend(), ScoringParams(**params))
            budgeted = Scorer(
                MockEntailmentBackend(budget=PremiseBudget(10_000)),
                ScoringParams(**params),
            )
            for c in claims:
                assert free.score_claim(doc, c) == budgeted.score_claim(doc, c)


class TestCountersAndMemo:
    def test_sentence_counts(self):
        scorer = make_scorer()
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        scorer.score_claim(doc, claim("alpha beta."))  # gate passes at 1.0
        assert scorer.backend_calls == {
            "sentence": 2,
            "coref": 0,
            "window": 0,
            "document": 0,
        }

    def test_memo_prevents_recomputation(self):
        scorer = make_scorer()
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        scorer.score_claim(doc, claim("alpha beta."))
        before = dict(scorer.backend_calls)
        scorer.score_claim(doc, claim("alpha beta."))
        assert scorer.backend_calls == before

    def test_stage_attribution_below_gate(self):
        scorer = make_scorer(window_size=2, gate_threshold=0.95)
        doc = doc_from_sentences("d", ["aa bb.", "cc dd.", "ee ff."])
        scorer.score_claim(doc, claim("zz yy."))
        assert scorer.backend_calls["sentence"] == 3
        assert scorer.backend_calls["coref"] == 0  # no clusters, stage skipped
        assert scorer.backend_calls["window"] == 2  # "aa bb. cc dd.", "cc dd. ee ff."
        assert scorer.backend_calls["document"] == 1

    def test_reset_counters(self):
        scorer = make_scorer()
        scorer.score_claim(doc_from_sentences("d", ["alpha."]), claim("alpha."))
        scorer.reset_counters()
        assert all(v == 0 for v in scorer.backend_calls.values())

    def test_debug_log_shape(self, caplog):
        scorer = make_scorer(gate_threshold=0.95, window_size=2)
        doc = doc_from_sentences("d", ["aa bb.", "cc dd.", "ee ff."])
        with caplog.at_level(logging.DEBUG, logger="sumfact.scoring"):
            scorer.score_claim(doc, claim("zz yy.", sid="s9", index=3))
        events = [json.loads(r.getMessage()) for r in caplog.records]
        stages = {e["stage"] for e in events}
        assert {"sentence", "window", "document"} == stages
        for event in events:
            assert event["event"] == "nli_calls"
            assert event["summary_id"] == "s9"
            assert event["claim_index"] == 3
            assert event["pairs"] > 0

    def test_thread_safety_smoke(self):
        scorer = make_scorer()
        doc = doc_from_sentences("d", [f"word{i} tail{i}." for i in range(6)])
        claims = [claim(f"word{i}.", index=i) for i in range(6)]
        results = {}

        def work(c):
            results[c.index] = scorer.score_claim(doc, c)

        threads = [threading.Thread(target=work, args=(c,)) for c in claims]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        fresh = make_scorer()
        for c in claims:
            assert results[c.index] == fresh.score_claim(doc, c)


class TestSummaryScoring:
    def test_mean_of_verdicts(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        claims = [claim("alpha beta.", index=0), claim("alpha gamma.", index=1)]
        report = scorer.score_summary(doc, claims)
        assert report.summary_id == "s1"
        assert len(report.verdicts) == 2
        assert report.score == (report.verdicts[0].score + report.verdicts[1].score) / 2
        assert report.claims_fallback is False

    def test_fallback_flag_passthrough(self, scorer):
        doc = doc_from_sentences("d", ["alpha."])
        report = scorer.score_summary(doc, [claim("alpha.")], claims_fallback=True)
        assert report.claims_fallback is True

    def test_empty_claims_rejected(self, scorer):
        with pytest.raises(ValueError):
            scorer.score_summary(doc_from_sentences("d", ["alpha."]), [])

    def test_mixed_summary_ids_rejected(self, scorer):
        doc = doc_from_sentences("d", ["alpha."])
        with pytest.raises(ValueError, match="mix"):
            scorer.score_summary(doc, [claim("alpha.", sid="a"), claim("beta.", sid="b")])


class TestAblations:
    def test_nli_sent_keeps_duplicate_sentences(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        summary = summary_from_sentences("s1", "d", ["Alpha beta.", "Alpha beta."])
        report = scorer.score_summary_ablation(doc, summary, [], "nli_sent")
        assert len(report.verdicts) == 2
        assert [v.claim.text for v in report.verdicts] == ["Alpha beta.", "Alpha beta."]
        assert all(v.stage == "sentence" for v in report.verdicts)

    def test_nli_claim_is_sentence_stage_only(self, scorer):
        doc = vunipola_doc()
        summary = summary_from_sentences("s1", "d", ["The player was ruled out."])
        c = claim("The player was ruled out.")
        report = scorer.score_summary_ablation(doc, summary, [c], "nli_claim")
        (verdict,) = report.verdicts
        assert verdict.stage == "sentence"
        assert verdict.score == pytest.approx(0.4)
        assert set(verdict.sub_scores) == {"sentence"}

    def test_nli_coref_stage_reflects_substitution(self, scorer):
        doc = vunipola_doc()
        summary = summary_from_sentences("s1", "d", ["The player was ruled out."])
        c = claim("The player was ruled out.")
        report = scorer.score_summary_ablation(doc, summary, [c], "nli_coref")
        (verdict,) = report.verdicts
        assert verdict.stage == "coref"
        assert verdict.score == pytest.approx(0.8)
        assert verdict.aligned.substitution is not None
        assert set(verdict.sub_scores) == {"sentence", "coref"}

    def test_nli_coref_without_win_is_sentence_stage(self, scorer):
        doc = doc_from_sentences("d", ["alpha beta.", "gamma delta."])
        summary = summary_from_sentences("s1", "d", ["alpha beta."])
        report = scorer.score_summary_ablation(doc, summary, [claim("alpha beta.")], "nli_coref")
        assert report.verdicts[0].stage == "sentence"

    def test_unknown_mode_rejected(self, scorer):
        doc = doc_from_sentences("d", ["alpha."])
        summary = summary_from_sentences("s1", "d", ["alpha."])
        with pytest.raises(ValueError, match="mode"):
            scorer.score_summary_ablation(doc, summary, [claim("alpha.")], "bogus")

    def test_ablation_requires_claims(self, scorer):
        doc = doc_from_sentences("d", ["alpha."])
        summary = summary_from_sentences("s1", "d", ["alpha."])
        with pytest.raises(ValueError, match="at least one claim"):
            scorer.score_summary_ablation(doc, summary, [], "nli_claim")


class TestOracleSpotChecks:
    """Small deterministic slice of the acceptance-level oracle comparison."""

    def test_fixed_cases_match_oracle(self):
        rng = random.Random(20240801)
        for i in range(25):
            doc, claims, params = random_case(rng, i)
            scorer = Scorer(MockEntailmentBackend(), ScoringParams(**params))
            for c in claims:
                got = oracles.verdict_to_view(scorer.score_claim(doc, c))
                want = oracles.oracle_verdict(doc, c, **params)
                assert got == want, f"case {i}, claim {c.index}"
