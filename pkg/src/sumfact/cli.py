"""Command-line interface.

Four batch commands: ``score`` (documents + summaries -> report JSONL),
``extract-claims`` (summaries -> claim cache JSON), ``eval-claims`` (system
vs human claim sets -> easiness report), and ``benchmark`` (labeled records
-> balanced-accuracy report). Exit codes: 0 success, 2 input error,
3 backend error, 4 degenerate labels.
"""

from __future__ import annotations

import functools
import json
import logging
import sys

import click

from . import benchmark as bench
from . import claim_metrics, formats, pipeline
from .benchmark import ScoreCache
from .config import MODES, PROTOCOLS, load_run_config
from .errors import (
    BackendError,
    DegenerateLabels,
    EmptyClaims,
    InputError,
    SumfactError,
)

_LOG_FORMAT = "%(message)s"


def _setup_logging(level: str) -> None:
    root = logging.getLogger("sumfact")
    root.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.WARNING))


def _fail(error: Exception, code: int):
    click.echo(
        json.dumps({"error": type(error).__name__, "message": str(error)}), err=True
    )
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DegenerateLabels as exc:
            _fail(exc, 4)
        except BackendError as exc:
            _fail(exc, 3)
        except InputError as exc:
            _fail(exc, 2)
        except OSError as exc:
            _fail(exc, 2)
        except SumfactError as exc:
            _fail(exc, 1)

    return wrapper


def _open_output(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _write_lines(path: str, lines: list[str]) -> None:
    stream, owned = _open_output(path)
    try:
        for line in lines:
            stream.write(line + "\n")
    finally:
        if owned:
            stream.close()


def _write_run_meta(path: str | None, meta: dict) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


_SCORING_FLAGS = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="JSON config file; flags override it."),
    click.option("--j", "window_size", type=int, default=None,
                 help="Window length in sentences for windowed premises."),
    click.option("--T", "gate_threshold", type=float, default=None,
                 help="Score gate at/above which coarser stages are skipped."),
    click.option("--nli-backend", default=None,
                 help="mock | local:<checkpoint> | remote:<url>"),
    click.option("--claim-backend", default=None,
                 help="none | cache:<path> | remote:<url> | local:<model>"),
    click.option("--coref-backend", default=None, help="none | heuristic"),
    click.option("--monotone-gate/--no-monotone-gate", default=None,
                 help="Below the gate, keep the better of coref and multi scores."),
    click.option("--workers", type=int, default=None, help="Concurrent scoring workers."),
    click.option("--log-level", default=None,
                 help="error | warning | info | debug (debug emits JSON call logs)."),
]


def _apply(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
@click.version_option(package_name="sumfact")
def main() -> None:
    """Factual consistency scoring for summaries."""


@main.command()
@click.argument("documents", type=click.Path(exists=True, dir_okay=False))
@click.argument("summaries", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", default="-", help="Report JSONL path ('-' = stdout).")
@click.option("--run-meta", default=None, help="Side file for run metadata JSON.")
@_apply(_SCORING_FLAGS)
@handle_errors
def score(documents, summaries, output, run_meta, config_path, **flags) -> None:
    """Score summaries against their documents; one report line each."""
    config = load_run_config(config_path, flags)
    _setup_logging(config.log_level)
    docs = formats.load_documents(documents)
    sums = formats.load_summaries(summaries)
    backend = pipeline.make_nli_backend(config)
    scorer = pipeline.make_scorer(config, backend)
    extractor = pipeline.make_claim_extractor(config)
    coref_backend = pipeline.make_coref_backend(config)
    units = pipeline.build_units(docs, sums, extractor, coref_backend)
    reports = pipeline.score_corpus(units, scorer, "full", config.workers)
    _write_lines(output, [formats.render_report(r) for r in reports])
    _write_run_meta(
        run_meta,
        {
            "command": "score",
            "nli_backend": backend.describe(),
            "claim_backend": extractor.describe() if extractor else "none",
            "coref_backend": coref_backend.describe(),
            "claims_fallback_count": sum(1 for u in units if u.claims_fallback),
            "coref_truncated_documents": _truncated_docs(units, config),
            "backend_calls": scorer.backend_calls,
            "summaries": len(reports),
        },
    )


def _truncated_docs(units, config) -> list[str]:
    limit = config.coref_max_sentences
    if limit is None or not config.coref_backend.startswith("heuristic"):
        return []
    seen = []
    for unit in units:
        if len(unit.document.sentences) > limit and unit.document.id not in seen:
            seen.append(unit.document.id)
    return seen


@main.command("extract-claims")
@click.argument("summaries", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", default="-", help="Claim cache JSON path ('-' = stdout).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--claim-backend", default=None,
              help="cache:<path> | remote:<url> | local:<model>")
@click.option("--workers", type=int, default=None)
@click.option("--log-level", default=None)
@handle_errors
def extract_claims(summaries, output, config_path, **flags) -> None:
    """Extract claims for every summary into a claim cache file."""
    config = load_run_config(config_path, flags)
    _setup_logging(config.log_level)
    sums = formats.load_summaries(summaries)
    extractor = pipeline.make_claim_extractor(config)
    if extractor is None:
        raise InputError("extract-claims needs --claim-backend (cache:/remote:/local:)")

    def one(summary):
        try:
            return [c.text for c in extractor.extract(summary)]
        except EmptyClaims:
            # Record the outcome; consumers apply the fallback policy on read.
            return []

    if config.workers > 1 and sums:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            claim_lists = list(pool.map(one, sums))
    else:
        claim_lists = [one(s) for s in sums]
    cache = {s.id: claims for s, claims in zip(sums, claim_lists)}
    stream, owned = _open_output(output)
    try:
        formats.write_claim_cache(stream, cache)
    finally:
        if owned:
            stream.close()


@main.command("eval-claims")
@click.argument("system", type=click.Path(exists=True, dir_okay=False))
@click.argument("human", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", default="-", help="Report JSON path ('-' = stdout).")
@handle_errors
def eval_claims(system, human, output) -> None:
    """Compare system claim sets against human ones (easiness P/R/F1)."""
    report = claim_metrics.evaluate_claim_sets(
        formats.load_claim_sets(system), formats.load_claim_sets(human)
    )
    _write_lines(output, [formats.dumps_fixed(report)])
    click.echo(
        "easiness_P={:.1f} easiness_R={:.1f} easiness_F1={:.1f} (percent)".format(
            report["easiness_p"] * 100,
            report["easiness_r"] * 100,
            report["easiness_f1"] * 100,
        ),
        err=True,
    )


@main.command()
@click.argument("records", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", default="-", help="Report JSON path ('-' = stdout).")
@click.option("--scores-csv", default=None, help="Per-record audit CSV path.")
@click.option("--protocol", type=click.Choice(PROTOCOLS), default=None)
@click.option("--mode", type=click.Choice(MODES + ("fenice",)), default=None,
              help="Scoring pipeline variant (fenice is an alias for full).")
@click.option("--cache-dir", default=None, help="Directory for score caches.")
@click.option("--bootstrap-seed", type=int, default=None)
@click.option("--run-meta", default=None, help="Side file for run metadata JSON.")
@_apply(_SCORING_FLAGS)
@handle_errors
def benchmark(records, output, scores_csv, run_meta, config_path, **flags) -> None:
    """Tune thresholds on validation splits and report balanced accuracy."""
    config = load_run_config(config_path, flags)
    _setup_logging(config.log_level)
    rows = formats.load_benchmark_records(records)
    backend = pipeline.make_nli_backend(config)
    scorer = pipeline.make_scorer(config, backend)
    extractor = pipeline.make_claim_extractor(config)
    coref_backend = pipeline.make_coref_backend(config)
    cache = None
    if config.cache_dir:
        cache = ScoreCache(config.cache_dir, pipeline.scorer_fingerprint(config, backend))
    score_fn = pipeline.record_scorer(scorer, extractor, config.mode, coref_backend)
    report = bench.run_benchmark(
        rows,
        score_fn,
        config.protocol,
        cache=cache,
        bootstrap_seed=config.bootstrap_seed,
        bootstrap_resamples=config.bootstrap_resamples,
        workers=config.workers,
    )
    _write_lines(output, [formats.dumps_fixed(formats.benchmark_report_to_dict(report, config.mode))])
    if scores_csv:
        with open(scores_csv, "w", encoding="utf-8", newline="") as fh:
            formats.write_scores_csv(fh, report.records)
    _write_run_meta(
        run_meta,
        {
            "command": "benchmark",
            "mode": config.mode,
            "protocol": config.protocol,
            "nli_backend": backend.describe(),
            "claim_backend": extractor.describe() if extractor else "none",
            "coref_backend": coref_backend.describe(),
            "claims_fallback_count": score_fn.stats["claims_fallback"],
            "records": len(rows),
            "cache": cache.path if cache else None,
        },
    )


if __name__ == "__main__":
    main()
