"""Entailment backends: (premise, hypothesis) -> probability triple.

Every backend returns an :class:`EntailmentTriple` whose components are the
probabilities of entailment, neutrality and contradiction. The alignment
score used throughout the toolkit is ``entailment - contradiction``, a value
in [-1, 1].

Three backends are provided: a deterministic lexical mock (the test
workhorse), an HTTP client for a remote scoring service, and an adapter for a
local transformers sequence-classification checkpoint.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Sequence

import requests

from .documents import WORD_RE
from .errors import NliBackendError, OversizedPremise

__all__ = [
    "EntailmentTriple",
    "PremiseBudget",
    "EntailmentBackend",
    "MockEntailmentBackend",
    "RemoteEntailmentBackend",
    "LocalEntailmentBackend",
]

_SUM_TOLERANCE = 1e-3

Pair = tuple[str, str]


@dataclass(frozen=True)
class EntailmentTriple:
    """Class probabilities for one premise/hypothesis pair.

    Each component must lie in [0, 1] and the three must sum to 1 within
    1e-3; larger deviations raise. On construction the triple is renormalized
    so the stored components sum to exactly 1.
    """

    entailment: float
    neutral: float
    contradiction: float

    def __post_init__(self) -> None:
        for name in ("entailment", "neutral", "contradiction"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise ValueError(f"{name} probability {value!r} outside [0, 1]")
        total = self.entailment + self.neutral + self.contradiction
        if abs(total - 1.0) > _SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within {_SUM_TOLERANCE}")
        if total != 1.0:
            object.__setattr__(self, "entailment", self.entailment / total)
            object.__setattr__(self, "neutral", self.neutral / total)
            object.__setattr__(self, "contradiction", self.contradiction / total)

    @property
    def score(self) -> float:
        """Signed alignment score: entailment minus contradiction."""
        return self.entailment - self.contradiction


@dataclass(frozen=True)
class PremiseBudget:
    """Maximum combined size of premise plus hypothesis, in backend units
    (characters for the mock, tokens for model backends)."""

    max_units: int

    def __post_init__(self) -> None:
        if self.max_units < 16:
            raise ValueError("budget below 16 units cannot fit any useful pair")


class EntailmentBackend:
    """Shared plumbing: input validation, budget checks, batch chunking.

    Subclasses implement :meth:`_infer` over a list of pairs no longer than
    ``batch_size``. Results must not depend on how callers batch their pairs.
    """

    budget: PremiseBudget | None = None

    def __init__(self, *, batch_size: int = 32, budget: PremiseBudget | None = None):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.batch_size = batch_size
        self.budget = budget

    def describe(self) -> str:
        raise NotImplementedError

    def measure(self, text: str) -> int:
        """Size of ``text`` in budget units. Default: characters."""
        return len(text)

    def exceeds_budget(self, premise: str, hypothesis: str) -> bool:
        if self.budget is None:
            return False
        return self.measure(premise) + self.measure(hypothesis) > self.budget.max_units

    def _check(self, premise: str, hypothesis: str, label: str) -> None:
        if not premise:
            raise ValueError(f"{label}: premise must be non-empty")
        if not hypothesis:
            raise ValueError(f"{label}: hypothesis must be non-empty")
        if self.exceeds_budget(premise, hypothesis):
            raise OversizedPremise(
                f"{label}: premise+hypothesis measure "
                f"{self.measure(premise) + self.measure(hypothesis)} units, "
                f"budget is {self.budget.max_units}"
            )

    def entail(self, premise: str, hypothesis: str) -> EntailmentTriple:
        self._check(premise, hypothesis, "pair")
        return self._infer([(premise, hypothesis)])[0]

    def entail_batch(self, pairs: Sequence[Pair]) -> list[EntailmentTriple]:
        for i, (premise, hypothesis) in enumerate(pairs):
            self._check(premise, hypothesis, f"pair {i}")
        out: list[EntailmentTriple] = []
        for lo in range(0, len(pairs), self.batch_size):
            out.extend(self._infer(list(pairs[lo : lo + self.batch_size])))
        return out

    def _infer(self, pairs: list[Pair]) -> list[EntailmentTriple]:
        raise NotImplementedError


def _token_set(text: str) -> set[str]:
    return set(WORD_RE.findall(text.lower()))


class MockEntailmentBackend(EntailmentBackend):
    """Deterministic lexical stand-in for a real entailment model.

    With unigram sets P and H (lowercased, split on non-alphanumerics) and
    overlap ratio ``o = |P & H| / |H|`` (0 when H is empty), the triple is
    ``(o, 1 - o, 0)``. If exactly one side contains the token "not", the mass
    flips to ``(0, 1 - o, o)`` so negation mismatches read as contradiction.
    """

    def describe(self) -> str:
        return "mock"

    def _infer(self, pairs: list[Pair]) -> list[EntailmentTriple]:
        out = []
        for premise, hypothesis in pairs:
            p = _token_set(premise)
            h = _token_set(hypothesis)
            o = len(p & h) / len(h) if h else 0.0
            if ("not" in p) != ("not" in h):
                out.append(EntailmentTriple(0.0, 1.0 - o, o))
            else:
                out.append(EntailmentTriple(o, 1.0 - o, 0.0))
        return out


class RemoteEntailmentBackend(EntailmentBackend):
    """Client for a remote scoring service.

    Protocol: POST ``{"pairs": [[premise, hypothesis], ...]}`` to ``url``;
    the service answers ``{"triples": [[ent, neu, con], ...]}`` in the same
    order. Any transport failure, non-2xx status, length mismatch or invalid
    triple raises :class:`NliBackendError`.
    """

    def __init__(
        self,
        url: str,
        *,
        timeout: float = 30.0,
        batch_size: int = 32,
        budget: PremiseBudget | None = None,
        session: requests.Session | None = None,
    ):
        super().__init__(batch_size=batch_size, budget=budget)
        self.url = url
        self.timeout = timeout
        self._session = session or requests.Session()

    def describe(self) -> str:
        return f"remote:{self.url}"

    def _infer(self, pairs: list[Pair]) -> list[EntailmentTriple]:
        try:
            response = self._session.post(
                self.url, json={"pairs": [[p, h] for p, h in pairs]}, timeout=self.timeout
            )
            response.raise_for_status()
            payload = response.json()
        except requests.RequestException as exc:
            raise NliBackendError(f"entailment service at {self.url} failed: {exc}") from exc
        except ValueError as exc:
            raise NliBackendError(f"entailment service returned non-JSON output: {exc}") from exc
        triples = payload.get("triples") if isinstance(payload, dict) else None
        if not isinstance(triples, list) or len(triples) != len(pairs):
            raise NliBackendError(
                f"entailment service returned {0 if not isinstance(triples, list) else len(triples)} "
                f"triples for {len(pairs)} pairs"
            )
        out = []
        for i, row in enumerate(triples):
            try:
                ent, neu, con = row
                out.append(EntailmentTriple(float(ent), float(neu), float(con)))
            except (TypeError, ValueError) as exc:
                raise NliBackendError(f"pair {i}: invalid triple {row!r}: {exc}") from exc
        return out


def _softmax(row: Sequence[float]) -> list[float]:
    peak = max(row)
    exps = [math.exp(x - peak) for x in row]
    total = sum(exps)
    return [x / total for x in exps]


class LocalEntailmentBackend(EntailmentBackend):
    """Adapter for a local transformers sequence-classification checkpoint.

    The label layout is resolved from the model config's ``id2label`` by name
    (substring match on "entail"/"neutral"/"contradict"), never by position;
    pass ``label_map`` explicitly when the config is missing or ambiguous.
    ``model`` and ``tokenizer`` can be injected to avoid loading weights in
    tests; the objects only need the calling conventions used below.
    """

    def __init__(
        self,
        checkpoint: str,
        *,
        label_map: dict[str, int] | None = None,
        device: str = "cpu",
        batch_size: int = 16,
        max_units: int | None = None,
        model=None,
        tokenizer=None,
    ):
        super().__init__(batch_size=batch_size)
        self.checkpoint = checkpoint
        if model is None or tokenizer is None:
            try:
                from transformers import (  # type: ignore
                    AutoModelForSequenceClassification,
                    AutoTokenizer,
                )
            except ImportError as exc:
                raise NliBackendError(
                    "the local entailment backend needs the 'transformers' package; "
                    "install the [models] extra"
                ) from exc
            tokenizer = tokenizer or AutoTokenizer.from_pretrained(checkpoint)
            if model is None:
                model = AutoModelForSequenceClassification.from_pretrained(checkpoint)
                model.to(device)
                model.eval()
        self._model = model
        self._tokenizer = tokenizer
        self._device = device
        self._labels = self._resolve_labels(label_map)
        limit = max_units
        if limit is None:
            declared = getattr(tokenizer, "model_max_length", None)
            # Some tokenizers report a huge sentinel instead of a real limit.
            if isinstance(declared, int) and 16 <= declared <= 100_000:
                limit = declared - 8
        if limit is not None:
            self.budget = PremiseBudget(limit)

    def describe(self) -> str:
        return f"local:{self.checkpoint}"

    def measure(self, text: str) -> int:
        return len(self._tokenizer.tokenize(text))

    def _resolve_labels(self, label_map: dict[str, int] | None) -> tuple[int, int, int]:
        if label_map is not None:
            try:
                return (label_map["entailment"], label_map["neutral"], label_map["contradiction"])
            except KeyError as exc:
                raise NliBackendError(f"label_map is missing the {exc} label") from exc
        id2label = getattr(getattr(self._model, "config", None), "id2label", None) or {}
        found: dict[str, int] = {}
        for idx, name in id2label.items():
            lowered = str(name).lower()
            for key, needle in (
                ("entailment", "entail"),
                ("neutral", "neutral"),
                ("contradiction", "contradict"),
            ):
                if needle in lowered:
                    if key in found:
                        raise NliBackendError(
                            f"checkpoint '{self.checkpoint}' has ambiguous label '{name}'; "
                            "pass label_map explicitly"
                        )
                    found[key] = int(idx)
        if set(found) != {"entailment", "neutral", "contradiction"}:
            raise NliBackendError(
                f"cannot resolve entailment/neutral/contradiction labels for "
                f"'{self.checkpoint}' from id2label={id2label!r}; pass label_map explicitly"
            )
        return (found["entailment"], found["neutral"], found["contradiction"])

    def _infer(self, pairs: list[Pair]) -> list[EntailmentTriple]:
        premises = [p for p, _ in pairs]
        hypotheses = [h for _, h in pairs]
        try:
            encoded = self._tokenizer(
                premises, hypotheses, padding=True, truncation=False, return_tensors="pt"
            )
        except Exception as exc:
            raise NliBackendError(f"tokenization failed: {exc}") from exc
        try:
            import torch  # type: ignore

            guard = torch.no_grad()
        except ImportError:
            guard = contextlib.nullcontext()
        encoded = {k: (v.to(self._device) if hasattr(v, "to") else v) for k, v in encoded.items()}
        try:
            with guard:
                logits = self._model(**encoded).logits
        except Exception as exc:
            raise NliBackendError(f"model forward pass failed: {exc}") from exc
        rows = logits.tolist() if hasattr(logits, "tolist") else list(logits)
        ent_i, neu_i, con_i = self._labels
        out = []
        for row in rows:
            probs = _softmax(row)
            out.append(EntailmentTriple(probs[ent_i], probs[neu_i], probs[con_i]))
        return out
