"""Run configuration: TOML file plus flag overrides, schema-checked.

The config hash excludes the run directory on purpose: two runs of the same
configuration into different directories must produce byte-identical
artifacts, and the hash is part of every artifact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

import tomli

from .backends import BackendConfig
from .crm import DEFAULT_TEMPERATURE_GRID
from .errors import ConfigError
from .irm import DEFAULT_EXCLUSION_CUTOFF, DEFAULT_THRESHOLD_GRID

THRESHOLD_MODES = ("ncal-inflection", "scal-minimum")


@dataclass(frozen=True)
class RunConfig:
    corpus_path: str = "corpus.csv"
    run_dir: str = "run"
    seed: int = 0
    t: int = 10
    backend_kind: str = "mock"
    model_id: str = "mock-grader"
    endpoint_url: str = ""
    max_retries: int = 3
    parallelism_limit: int = 4
    request_timeout: float = 30.0
    default_temperature: float = 1.0
    mock_profile_path: str | None = None
    template_path: str | None = None
    course: str = "Introduction to Computer Science"
    temperature_grid: tuple[float, ...] = DEFAULT_TEMPERATURE_GRID
    threshold_grid: tuple[float, ...] = DEFAULT_THRESHOLD_GRID
    exclusion_cutoff: float = DEFAULT_EXCLUSION_CUTOFF
    threshold_mode: str = "ncal-inflection"

    def __post_init__(self):
        if self.t < 2:
            raise ConfigError("t must be >= 2")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ConfigError(f"threshold_mode must be one of {THRESHOLD_MODES}")
        for temp in self.temperature_grid:
            if not (0.0 <= temp <= 2.0):
                raise ConfigError(f"temperature {temp} outside [0.0, 2.0]")
        if not (0.0 <= self.default_temperature <= 2.0):
            raise ConfigError("default_temperature outside [0.0, 2.0]")
        if list(self.threshold_grid) != sorted(self.threshold_grid):
            raise ConfigError("threshold_grid must be ascending")
        if self.exclusion_cutoff < 0:
            raise ConfigError("exclusion_cutoff must be >= 0")
        if self.backend_kind not in ("mock", "remote"):
            raise ConfigError(f"unknown backend_kind {self.backend_kind!r}")

    def backend_config(self, temperature: float | None = None) -> BackendConfig:
        return BackendConfig(
            backend_kind=self.backend_kind, model_id=self.model_id,
            temperature=self.default_temperature if temperature is None else temperature,
            endpoint_url=self.endpoint_url, max_retries=self.max_retries,
            parallelism_limit=self.parallelism_limit,
            request_timeout=self.request_timeout, seed=self.seed)

    def config_hash(self) -> str:
        payload = {f.name: getattr(self, f.name) for f in fields(self)
                   if f.name != "run_dir"}
        canonical = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from an optional TOML file plus keyword overrides."""
    values: dict = {}
    if path is not None:
        raw = Path(path).read_bytes()
        try:
            data = tomli.loads(raw.decode("utf-8"))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("temperature_grid", "threshold_grid"):
        if key in values:
            values[key] = tuple(float(v) for v in values[key])
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
