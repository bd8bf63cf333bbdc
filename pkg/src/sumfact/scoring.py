"""Claim scoring engine.

The pipeline for one claim runs in stages. First every document sentence is
scored as a premise and the best one becomes the anchor. The anchor is then
re-scored alongside coreference variants (the anchor with one mention swapped
for another surface form of its entity). If the best of those reaches the
gate threshold, that is the verdict; otherwise the claim is re-evaluated
against windows of consecutive sentences and the whole document, and the
better of those two replaces the coref score outright, even when lower. A
summary's score is the arithmetic mean over its claim verdicts.

The engine memoizes backend results on (premise, hypothesis) within a run and
counts actual backend pairs per stage, so the gating short-circuit (no
window/document calls when the gate passes) is observable from counters and
from debug logs.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from typing import Literal, Sequence

from .documents import Claim, CorefCluster, Document, Mention, Summary
from .errors import OversizedPremise
from .nli import EntailmentBackend, EntailmentTriple

__all__ = [
    "Granularity",
    "Stage",
    "AblationMode",
    "ScoringParams",
    "Substitution",
    "AlignedSpan",
    "ClaimVerdict",
    "FactualityReport",
    "Scorer",
    "nli_score",
    "coref_variants",
]

logger = logging.getLogger("sumfact.scoring")

Granularity = Literal["sentence", "coref_sentence", "window", "document"]
Stage = Literal["sentence", "coref", "multi_granularity"]
AblationMode = Literal["nli_sent", "nli_claim", "nli_coref"]

STAGES = ("sentence", "coref", "window", "document")


@dataclass(frozen=True)
class ScoringParams:
    """Knobs of the claim-scoring formula.

    ``window_size`` is the length (in sentences) of the windowed premises;
    ``gate_threshold`` is the coref-stage score at or above which the
    window/document stages are skipped. Serialized as ``j`` and ``T`` in
    report JSON.
    """

    window_size: int = 5
    gate_threshold: float = 0.8
    max_coref_variants: int = 20

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not (-1.0 <= self.gate_threshold <= 1.0):
            raise ValueError("gate_threshold must lie in [-1, 1]")
        if self.max_coref_variants < 1:
            raise ValueError("max_coref_variants must be >= 1")


@dataclass(frozen=True)
class Substitution:
    """Record of a single mention swap: ``replaced`` (the surface that was in
    the sentence) became ``replacement`` (another surface of the entity)."""

    replaced: str
    replacement: str


@dataclass(frozen=True)
class AlignedSpan:
    """The premise that produced a score, located by sentence range.

    ``sentence_end`` is inclusive. A budget-chunked document premise is
    reported as granularity ``window`` with the actual chunk range, so a
    ``document`` span always covers the whole document.
    """

    granularity: Granularity
    sentence_start: int
    sentence_end: int
    premise_text: str
    substitution: Substitution | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.sentence_start <= self.sentence_end):
            raise ValueError(
                f"invalid sentence range [{self.sentence_start}, {self.sentence_end}]"
            )
        if self.granularity in ("sentence", "coref_sentence"):
            if self.sentence_start != self.sentence_end:
                raise ValueError(f"{self.granularity} span must cover exactly one sentence")
        if self.substitution is not None and self.granularity != "coref_sentence":
            raise ValueError("substitution is only meaningful for coref_sentence spans")
        if self.granularity == "document" and self.sentence_start != 0:
            raise ValueError("document span must start at sentence 0")


@dataclass(frozen=True)
class ClaimVerdict:
    """Outcome for one claim: final score, the stage that produced it, the
    winning premise, and the per-stage sub-scores that were computed."""

    claim: Claim
    score: float
    stage: Stage
    aligned: AlignedSpan
    sub_scores: dict[str, float]


@dataclass(frozen=True)
class FactualityReport:
    """Scores for one summary; ``score`` is the mean over verdict scores."""

    summary_id: str
    score: float
    verdicts: tuple[ClaimVerdict, ...]
    claims_fallback: bool
    params: ScoringParams


def nli_score(premise: str, claim_text: str, backend: EntailmentBackend) -> float:
    """Signed entailment score for one pair: p(entail) - p(contradict)."""
    return backend.entail(premise, claim_text).score


def coref_variants(
    doc: Document, sentence_index: int, params: ScoringParams
) -> list[tuple[str, Substitution]]:
    """Single-substitution rewrites of one sentence.

    For each cluster mention inside the sentence (ordered by start offset)
    and each distinct other surface form in its cluster (in cluster order),
    emit the sentence with that one mention replaced. The original sentence
    is not included; callers add it themselves. Capped at
    ``params.max_coref_variants``.
    """
    if not (0 <= sentence_index < len(doc.sentences)):
        raise ValueError(f"sentence index {sentence_index} out of range")
    sentence = doc.sentences[sentence_index]
    local: list[tuple[Mention, CorefCluster]] = []
    for cluster in doc.coref_clusters:
        for mention in cluster.mentions:
            if mention.sentence_index == sentence_index:
                local.append((mention, cluster))
    local.sort(key=lambda pair: (pair[0].start, pair[0].end))
    out: list[tuple[str, Substitution]] = []
    for mention, cluster in local:
        seen = {mention.surface}
        for other in cluster.mentions:
            if other.surface in seen:
                continue
            seen.add(other.surface)
            variant = (
                sentence.text[: mention.start] + other.surface + sentence.text[mention.end :]
            )
            out.append((variant, Substitution(mention.surface, other.surface)))
            if len(out) >= params.max_coref_variants:
                return out
    return out


class Scorer:
    """Stateful engine: one backend, one parameter set, one memo cache.

    ``backend_calls`` counts premise/hypothesis pairs actually sent to the
    backend, per stage; memo hits are free and uncounted. Safe to share
    across threads (the memo and counters are lock-guarded), though counts
    interleave when multiple claims run concurrently.

    ``monotone_gate=True`` departs from the default formula: when the coref
    score misses the gate, the verdict takes the max of the coref and
    multi-granularity scores instead of substituting unconditionally.
    """

    def __init__(
        self,
        backend: EntailmentBackend,
        params: ScoringParams | None = None,
        *,
        monotone_gate: bool = False,
    ):
        self.backend = backend
        self.params = params or ScoringParams()
        self.monotone_gate = monotone_gate
        self._memo: dict[tuple[str, str], EntailmentTriple] = {}
        self._lock = threading.Lock()
        self.backend_calls: dict[str, int] = {stage: 0 for stage in STAGES}

    # -- backend plumbing ---------------------------------------------------

    def reset_counters(self) -> None:
        with self._lock:
            for stage in STAGES:
                self.backend_calls[stage] = 0

    def _score_many(
        self, premises: Sequence[str], hypothesis: str, stage: str, claim: Claim
    ) -> list[float]:
        """Scores for each premise against one hypothesis, memoized.

        Distinct uncached premises are sent to the backend as one batch (the
        backend re-chunks to its own batch size), keeping results independent
        of caller-side batching.
        """
        with self._lock:
            misses = []
            for premise in premises:
                if (premise, hypothesis) not in self._memo and premise not in misses:
                    misses.append(premise)
        if misses:
            triples = self.backend.entail_batch([(p, hypothesis) for p in misses])
            with self._lock:
                for premise, triple in zip(misses, triples):
                    self._memo[(premise, hypothesis)] = triple
                self.backend_calls[stage] += len(misses)
            logger.debug(
                json.dumps(
                    {
                        "event": "nli_calls",
                        "stage": stage,
                        "summary_id": claim.summary_id,
                        "claim_index": claim.index,
                        "pairs": len(misses),
                    }
                )
            )
        with self._lock:
            return [self._memo[(premise, hypothesis)].score for premise in premises]

    # -- stages -------------------------------------------------------------

    def score_sentences(self, doc: Document, claim: Claim) -> tuple[float, int]:
        """Best per-sentence score and the lowest index attaining it."""
        scores = self._score_many(
            [s.text for s in doc.sentences], claim.text, "sentence", claim
        )
        best = max(scores)
        return best, scores.index(best)

    def score_coref(self, doc: Document, claim: Claim) -> tuple[float, AlignedSpan]:
        """Re-score the anchor sentence against its coreference variants.

        The original sentence is always in the candidate set and wins ties,
        so the result never drops below the sentence-stage score. With no
        clusters this degrades to the sentence stage exactly.
        """
        sent_score, anchor = self.score_sentences(doc, claim)
        sentence = doc.sentences[anchor]
        variants = coref_variants(doc, anchor, self.params)
        if not variants:
            return sent_score, AlignedSpan("sentence", anchor, anchor, sentence.text)
        candidates = [sentence.text] + [text for text, _ in variants]
        scores = self._score_many(candidates, claim.text, "coref", claim)
        best = max(scores)
        winner = scores.index(best)
        if winner == 0:
            return best, AlignedSpan("sentence", anchor, anchor, sentence.text)
        text, substitution = variants[winner - 1]
        return best, AlignedSpan("coref_sentence", anchor, anchor, text, substitution)

    def score_window(self, doc: Document, claim: Claim, k: int) -> tuple[float, int]:
        """Best k-sentence window score and the lowest winning start index."""
        score, start, _ = self._window_stage(doc, claim, k)
        return score, start

    def score_multi(self, doc: Document, claim: Claim) -> tuple[float, AlignedSpan]:
        score, aligned, _, _ = self._multi(doc, claim)
        return score, aligned

    def score_claim(self, doc: Document, claim: Claim) -> ClaimVerdict:
        """Full gated pipeline for one claim.

        The window/document stages are only reached (and only issue backend
        calls) when the coref score misses the gate; below the gate their
        result replaces the coref score even when lower, unless
        ``monotone_gate`` is set.
        """
        sent_score, _ = self.score_sentences(doc, claim)
        coref_score, coref_span = self.score_coref(doc, claim)
        sub = {"sentence": sent_score, "coref": coref_score}
        if coref_score >= self.params.gate_threshold:
            return ClaimVerdict(claim, coref_score, "coref", coref_span, sub)
        multi_score, multi_span, window_score, document_score = self._multi(doc, claim)
        sub["window"] = window_score
        sub["document"] = document_score
        if self.monotone_gate and coref_score > multi_score:
            return ClaimVerdict(claim, coref_score, "coref", coref_span, sub)
        return ClaimVerdict(claim, multi_score, "multi_granularity", multi_span, sub)

    def score_summary(
        self, doc: Document, claims: Sequence[Claim], *, claims_fallback: bool = False
    ) -> FactualityReport:
        """Score every claim and average; verdicts keep claim order."""
        if not claims:
            raise ValueError("score_summary needs at least one claim")
        summary_id = claims[0].summary_id
        for claim in claims:
            if claim.summary_id != summary_id:
                raise ValueError(
                    f"claims mix summaries '{summary_id}' and '{claim.summary_id}'"
                )
        verdicts = tuple(self.score_claim(doc, claim) for claim in claims)
        score = sum(v.score for v in verdicts) / len(verdicts)
        return FactualityReport(summary_id, score, verdicts, claims_fallback, self.params)

    def score_summary_ablation(
        self,
        doc: Document,
        summary: Summary,
        claims: Sequence[Claim],
        mode: AblationMode,
    ) -> FactualityReport:
        """Reduced pipelines for ablation comparisons.

        ``nli_sent`` ignores ``claims`` and uses the summary's sentences as
        hypotheses (duplicates kept: the mean runs over sentences, not a
        deduplicated set). ``nli_claim`` stops after the sentence stage;
        ``nli_coref`` adds the coref stage. No window/document premises in
        any mode.
        """
        if mode == "nli_sent":
            hypotheses = [
                Claim(summary.id, i, s.text) for i, s in enumerate(summary.sentences)
            ]
        elif mode in ("nli_claim", "nli_coref"):
            if not claims:
                raise ValueError(f"mode {mode} needs at least one claim")
            hypotheses = list(claims)
        else:
            raise ValueError(f"unknown ablation mode {mode!r}")
        verdicts = []
        for claim in hypotheses:
            sent_score, anchor = self.score_sentences(doc, claim)
            if mode == "nli_coref":
                coref_score, span = self.score_coref(doc, claim)
                stage: Stage = "coref" if span.granularity == "coref_sentence" else "sentence"
                verdicts.append(
                    ClaimVerdict(
                        claim,
                        coref_score,
                        stage,
                        span,
                        {"sentence": sent_score, "coref": coref_score},
                    )
                )
            else:
                span = AlignedSpan("sentence", anchor, anchor, doc.sentences[anchor].text)
                verdicts.append(
                    ClaimVerdict(claim, sent_score, "sentence", span, {"sentence": sent_score})
                )
        score = sum(v.score for v in verdicts) / len(verdicts)
        return FactualityReport(summary.id, score, tuple(verdicts), False, self.params)

    # -- window internals ---------------------------------------------------

    def _join(self, doc: Document, start: int, length: int) -> str:
        return " ".join(s.text for s in doc.sentences[start : start + length])

    def _window_premises(
        self, doc: Document, start: int, length: int, hypothesis: str
    ) -> list[tuple[int, int, str]]:
        """Premises for one window: itself, or budget-sized chunks of it.

        A window over the backend budget is replaced by maximal-length runs
        of consecutive sentences that fit, each run starting half the
        previous run past the last start (stride at least 1). A single
        sentence over budget is unsplittable and raises.
        """
        text = self._join(doc, start, length)
        if not self.backend.exceeds_budget(text, hypothesis):
            return [(start, length, text)]
        out: list[tuple[int, int, str]] = []
        limit = start + length
        cursor = start
        while True:
            fit = 0
            while cursor + fit < limit:
                candidate = self._join(doc, cursor, fit + 1)
                if self.backend.exceeds_budget(candidate, hypothesis):
                    break
                fit += 1
            if fit == 0:
                raise OversizedPremise(
                    f"sentence {cursor} alone exceeds the backend budget "
                    f"against this hypothesis; cannot chunk further"
                )
            out.append((cursor, fit, self._join(doc, cursor, fit)))
            if cursor + fit >= limit:
                return out
            cursor += max(1, fit // 2)

    def _window_stage(
        self, doc: Document, claim: Claim, k: int
    ) -> tuple[float, int, tuple[int, int, str]]:
        """Max over all k-windows; returns (score, window_start, winning premise).

        The winning premise is the window itself, or its best chunk when the
        budget forced a split. Counted under stage "document" when the window
        covers the whole document, else "window".
        """
        if k < 1:
            raise ValueError("window length must be >= 1")
        n = len(doc.sentences)
        k = min(k, n)
        stage = "document" if k == n else "window"
        per_window = [
            self._window_premises(doc, i, k, claim.text) for i in range(n - k + 1)
        ]
        flat = [text for premises in per_window for (_, _, text) in premises]
        scores = self._score_many(flat, claim.text, stage, claim)
        best_score = float("-inf")
        best_start = 0
        best_premise = per_window[0][0]
        offset = 0
        for window_index, premises in enumerate(per_window):
            chunk_scores = scores[offset : offset + len(premises)]
            offset += len(premises)
            top = max(chunk_scores)
            if top > best_score:
                best_score = top
                best_start = window_index
                best_premise = premises[chunk_scores.index(top)]
        return best_score, best_start, best_premise

    def _multi(
        self, doc: Document, claim: Claim
    ) -> tuple[float, AlignedSpan, float, float]:
        """Max of the windowed and whole-document scores.

        Returns (score, aligned, window_score, document_score). Ties go to
        the document premise (broader evidence); when the document fits in
        one window the two evaluations coincide via the memo cache.
        """
        n = len(doc.sentences)
        window_score, _, window_premise = self._window_stage(
            doc, claim, min(self.params.window_size, n)
        )
        document_score, _, document_premise = self._window_stage(doc, claim, n)
        if window_score > document_score:
            start, length, text = window_premise
            aligned = AlignedSpan("window", start, start + length - 1, text)
            return window_score, aligned, window_score, document_score
        start, length, text = document_premise
        if length == n:
            aligned = AlignedSpan("document", 0, n - 1, text)
        else:
            # Budget chunking split the document premise; report the real range.
            aligned = AlignedSpan("window", start, start + length - 1, text)
        return document_score, aligned, window_score, document_score
