"""Run configuration: one JSON file plus CLI flag overrides.

Every flag has a config-file key of the same meaning; precedence is
flag > config file > built-in default. Credentials never live here, only the
name of the environment variable holding them.

Backend selectors are compact strings:
  NLI        "mock" | "local:<checkpoint>" | "remote:<url>"
  claims     "none" | "cache:<path>" | "remote:<url>" | "local:<model>"
  coref      "none" | "heuristic"
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Mapping

from .errors import InputError

__all__ = ["RunConfig", "load_run_config", "MODES", "PROTOCOLS"]

MODES = ("full", "nli_sent", "nli_claim", "nli_coref")
PROTOCOLS = ("per_split", "single_threshold")

# The full pipeline also answers to this historical alias on the CLI.
_MODE_ALIASES = {"fenice": "full"}


@dataclass
class RunConfig:
    nli_backend: str = "mock"
    nli_batch_size: int = 32
    nli_max_units: int | None = None
    claim_backend: str = "none"
    claim_model: str | None = None
    claim_api_key_env: str = "SUMFACT_API_KEY"
    claim_timeout: float = 60.0
    claim_max_retries: int = 2
    claim_max_tokens: int = 1024
    claim_max_in_flight: int = 4
    coref_backend: str = "none"
    coref_max_sentences: int | None = None
    window_size: int = 5
    gate_threshold: float = 0.8
    max_coref_variants: int = 20
    monotone_gate: bool = False
    workers: int = 1
    cache_dir: str | None = None
    bootstrap_seed: int = 0
    bootstrap_resamples: int = 1000
    protocol: str = "per_split"
    mode: str = "full"
    log_level: str = "warning"

    def validate(self) -> None:
        if self.window_size < 1:
            raise InputError("window_size must be >= 1")
        if not (-1.0 <= self.gate_threshold <= 1.0):
            raise InputError("gate_threshold must lie in [-1, 1]")
        if self.max_coref_variants < 1:
            raise InputError("max_coref_variants must be >= 1")
        if self.workers < 1:
            raise InputError("workers must be >= 1")
        if self.nli_batch_size < 1:
            raise InputError("nli_batch_size must be >= 1")
        if self.protocol not in PROTOCOLS:
            raise InputError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.bootstrap_resamples < 1:
            raise InputError("bootstrap_resamples must be >= 1")
        for selector, allowed in (
            (self.nli_backend, ("mock", "local", "remote")),
            (self.claim_backend, ("none", "cache", "remote", "local")),
            (self.coref_backend, ("none", "heuristic")),
        ):
            kind = selector.split(":", 1)[0]
            if kind not in allowed:
                raise InputError(
                    f"backend selector {selector!r}: kind must be one of {allowed}"
                )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value: object) -> object:
    """Light type coercion so config files and flags can both be loose."""
    if value is None:
        return None
    field = _FIELDS[name]
    kind = field.type
    try:
        if kind == "int" or kind == "int | None":
            return int(value)  # type: ignore[call-overload]
        if kind == "float":
            return float(value)  # type: ignore[arg-type]
        if kind == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
            raise ValueError(f"not a boolean: {value!r}")
        return str(value) if not isinstance(value, str) else value
    except (TypeError, ValueError) as exc:
        raise InputError(f"config key '{name}': {exc}") from exc


def load_run_config(
    path: str | None = None, overrides: Mapping[str, object] | None = None
) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, then overrides.

    Override values of ``None`` mean "not given" and are skipped, so CLI
    flags can default to ``None`` without clobbering file settings. Unknown
    keys anywhere are hard errors; silent typos burn too much compute.
    """
    values: dict[str, object] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot open config {path}: {exc}") from exc
        except ValueError as exc:
            raise InputError(f"config {path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"config {path}: expected a JSON object")
        for key, value in data.items():
            if key not in _FIELDS:
                raise InputError(f"config {path}: unknown key {key!r}")
            values[key] = _coerce(key, value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise InputError(f"unknown config override {key!r}")
        values[key] = _coerce(key, value)
    if "mode" in values:
        values["mode"] = _MODE_ALIASES.get(str(values["mode"]), values["mode"])
    config = RunConfig(**values)  # type: ignore[arg-type]
    config.validate()
    return config
