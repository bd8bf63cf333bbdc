"""Claim extraction: turn a summary into a list of atomic claims.

The prompt template is frozen: its wording is part of the scoring contract
and changing it invalidates cached extractions, so it is versioned by
``PROMPT_TEMPLATE_ID`` and never built dynamically. Extraction backends are a
JSON file cache (exact reproduction of a prior run), a remote chat-completion
endpoint, and a local seq2seq model; all three feed the same tolerant parser.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol

import requests

from .documents import Claim, Summary, build_claims
from .errors import (
    ClaimCacheMiss,
    EmptyClaims,
    ExtractorUnavailable,
    MalformedClaimOutput,
)

__all__ = [
    "PROMPT_TEMPLATE_ID",
    "ClaimPrompt",
    "ExtractorConfig",
    "ClaimExtractor",
    "FileCacheExtractor",
    "RemoteLlmExtractor",
    "LocalSeq2SeqExtractor",
    "build_prompt",
    "parse_claims",
    "extract_claims",
]

logger = logging.getLogger("sumfact.claims")

PROMPT_TEMPLATE_ID = "atomic-claims/v1"

_PROMPT = '''We define a claim as an "elementary information unit in a sentence, which no longer needs to be further split."
For example, given the following sentence:
INPUT:
"NASA's Perseverance rover has discovered ancient microbial life on Mars according to a recent study published in the journal Science. It established a set of new paradigms for space exploration"

OUTPUT:
{{"claims": ["NASA's Perseverance rover discovered ancient microbial life.", "Ancient microbial life was discovered on Mars.", "The discovery was made according to a recent study.", "The study was published in the journal Science.", "The study established a set of new paradigms for space exploration."]}}

Recommendations:
- Please consider not repeating the subject in the claims.
- If possible, use a noun as the subject in the claim (avoid pronouns).
- Do not generate any novel word, be faithful to the provided input.
- Your response must be only the JSON object, without any other text or explanation.
- Each fact expressed in the source text must be present in the output.

Now do this task for this input:
INPUT:
{summary}

OUTPUT:
'''


@dataclass(frozen=True)
class ClaimPrompt:
    """A rendered extraction prompt, tagged with its template version."""

    template_id: str
    rendered: str


def build_prompt(summary: Summary) -> ClaimPrompt:
    """Render the fixed template with the summary text appended verbatim."""
    return ClaimPrompt(PROMPT_TEMPLATE_ID, _PROMPT.format(summary=summary.text))


def _outer_braces(raw: str) -> str | None:
    lo = raw.find("{")
    hi = raw.rfind("}")
    if lo == -1 or hi <= lo:
        return None
    return raw[lo : hi + 1]


def _claims_field(obj: object) -> list[str] | None:
    if isinstance(obj, dict):
        claims = obj.get("claims")
        if isinstance(claims, list) and all(isinstance(c, str) for c in claims):
            return claims
    return None


def parse_claims(raw: str, summary_id: str) -> list[Claim]:
    """Parse extractor output into normalized, deduplicated claims.

    Primary format is a JSON object with a string-array ``claims`` field.
    Recovery routes, in order: strip text around the outermost braces, then
    retry as a Python literal (models often emit single-quoted dicts), then
    fall back to one claim per non-empty line ending in sentence punctuation.
    A successfully parsed but empty claim list raises :class:`EmptyClaims`;
    output no route can parse raises :class:`MalformedClaimOutput`.
    """
    candidates = []
    stripped = raw.strip()
    if stripped:
        candidates.append(stripped)
    trimmed = _outer_braces(raw)
    if trimmed is not None and trimmed not in candidates:
        candidates.append(trimmed)
    texts: list[str] | None = None
    for candidate in candidates:
        for load in (json.loads, ast.literal_eval):
            try:
                parsed = load(candidate)
            except Exception:
                continue
            texts = _claims_field(parsed)
            if texts is not None:
                break
        if texts is not None:
            break
    if texts is None:
        lines = [line.strip() for line in raw.splitlines()]
        texts = [line for line in lines if line and line[-1] in ".!?"]
        if not texts:
            raise MalformedClaimOutput(
                f"summary '{summary_id}': extractor output is neither a JSON object "
                "with a 'claims' string array nor lines of sentence-like claims"
            )
    claims = build_claims(summary_id, texts)
    if not claims:
        raise EmptyClaims(f"summary '{summary_id}': extractor returned zero claims")
    return claims


@dataclass(frozen=True)
class ExtractorConfig:
    """Backend selection and plumbing for claim extraction.

    ``target`` is the cache path, endpoint URL, or model identifier,
    depending on ``backend``. ``api_key_env`` names the environment variable
    holding the remote credential; the value itself never appears in config
    files or logs.
    """

    backend: str  # "file-cache" | "remote-llm" | "local-seq2seq"
    target: str
    model: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    retry_delay: float = 1.0
    api_key_env: str = "SUMFACT_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 1024
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.backend not in ("file-cache", "remote-llm", "local-seq2seq"):
            raise ValueError(f"unknown claim backend {self.backend!r}")
        if not (0 <= self.max_retries <= 5):
            raise ValueError("max_retries must be between 0 and 5")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class ClaimExtractor(Protocol):
    def extract(self, summary: Summary) -> list[Claim]: ...

    def describe(self) -> str: ...


class FileCacheExtractor:
    """Serve claims from a JSON mapping of summary id to claim texts."""

    def __init__(self, cache: Mapping[str, list[str]], source: str = "inline"):
        self._cache = dict(cache)
        self._source = source

    @classmethod
    def from_path(cls, path: str) -> "FileCacheExtractor":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ClaimCacheMiss(f"claim cache {path} is not a JSON object")
        return cls(data, source=path)

    def describe(self) -> str:
        return f"cache:{self._source}"

    def __contains__(self, summary_id: str) -> bool:
        return summary_id in self._cache

    def extract(self, summary: Summary) -> list[Claim]:
        if summary.id not in self._cache:
            raise ClaimCacheMiss(f"claim cache has no entry for summary '{summary.id}'")
        claims = build_claims(summary.id, self._cache[summary.id])
        if not claims:
            raise EmptyClaims(f"summary '{summary.id}': cached claim list is empty")
        return claims


def _redact(headers: Mapping[str, str]) -> dict[str, str]:
    return {
        k: ("<redacted>" if k.lower() in ("authorization", "api-key", "x-api-key") else v)
        for k, v in headers.items()
    }


class RemoteLlmExtractor:
    """Chat-completion client for claim extraction.

    Sends the rendered prompt as a single user message with temperature 0 and
    retries transport failures, 429 and 5xx responses up to ``max_retries``
    times before raising :class:`ExtractorUnavailable`. Concurrent calls are
    capped by a semaphore of ``max_in_flight``.
    """

    def __init__(self, config: ExtractorConfig, session: requests.Session | None = None):
        if config.backend != "remote-llm":
            raise ValueError("RemoteLlmExtractor requires a remote-llm config")
        self.config = config
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(config.max_in_flight)

    def describe(self) -> str:
        model = self.config.model or "default"
        return f"remote-llm:{self.config.target}#{model}@t={self.config.temperature}"

    def extract(self, summary: Summary) -> list[Claim]:
        prompt = build_prompt(summary)
        raw = self._complete(prompt.rendered, summary.id)
        return parse_claims(raw, summary.id)

    def _complete(self, prompt: str, summary_id: str) -> str:
        cfg = self.config
        body = {
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        if cfg.model:
            body["model"] = cfg.model
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        logger.debug(
            json.dumps(
                {
                    "event": "claim_request",
                    "summary_id": summary_id,
                    "url": cfg.target,
                    "headers": _redact(headers),
                    "body": body,
                }
            )
        )
        last_error = "no attempt made"
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                time.sleep(cfg.retry_delay)
            try:
                with self._gate:
                    response = self._session.post(
                        cfg.target, json=body, headers=headers, timeout=cfg.timeout
                    )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                raise ExtractorUnavailable(
                    f"summary '{summary_id}': extraction endpoint rejected the request "
                    f"with HTTP {response.status_code}"
                )
            try:
                payload = response.json()
                content = payload["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as exc:
                raise ExtractorUnavailable(
                    f"summary '{summary_id}': malformed completion envelope: {exc}"
                ) from exc
            logger.debug(
                json.dumps(
                    {"event": "claim_response", "summary_id": summary_id, "content": content}
                )
            )
            return content
        raise ExtractorUnavailable(
            f"summary '{summary_id}': extraction endpoint unreachable after "
            f"{cfg.max_retries + 1} attempts ({last_error})"
        )


class LocalSeq2SeqExtractor:
    """Local text-to-text model honoring the summary-in / claims-JSON-out
    contract. A ``generate`` callable can be injected for tests; otherwise a
    transformers text2text pipeline is loaded lazily on first use."""

    def __init__(self, model_id: str, generate: Callable[[str], str] | None = None):
        self.model_id = model_id
        self._generate = generate

    def describe(self) -> str:
        return f"local-seq2seq:{self.model_id}"

    def _ensure(self) -> Callable[[str], str]:
        if self._generate is None:
            try:
                from transformers import pipeline  # type: ignore
            except ImportError as exc:
                raise ExtractorUnavailable(
                    "the local-seq2seq backend needs the 'transformers' package; "
                    "install the [models] extra"
                ) from exc
            runner = pipeline("text2text-generation", model=self.model_id)

            def generate(text: str) -> str:
                return runner(text, max_length=1024)[0]["generated_text"]

            self._generate = generate
        return self._generate

    def extract(self, summary: Summary) -> list[Claim]:
        generate = self._ensure()
        try:
            raw = generate(summary.text)
        except Exception as exc:
            raise ExtractorUnavailable(
                f"summary '{summary.id}': local extraction model failed: {exc}"
            ) from exc
        return parse_claims(raw, summary.id)


def extract_claims(summary: Summary, config: ExtractorConfig) -> list[Claim]:
    """One-shot extraction with a fresh backend built from ``config``."""
    return make_extractor(config).extract(summary)


def make_extractor(config: ExtractorConfig) -> ClaimExtractor:
    if config.backend == "file-cache":
        return FileCacheExtractor.from_path(config.target)
    if config.backend == "remote-llm":
        return RemoteLlmExtractor(config)
    return LocalSeq2SeqExtractor(config.target)
