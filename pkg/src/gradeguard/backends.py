"""Grader backends: a remote chat-completion client and a seeded mock.

The mock is the repo's stand-in for LLM stochasticity. Its grade for one
request is quantize_half(clamp(true_grade + eps, 0, 5)) with eps drawn
zero-mean Gaussian whose sd composes a base term, a per-record difficulty
term, and a temperature term. Each (seed, record_id, repetition_index,
temperature) tuple owns its own generator, so results are reproducible and
independent of request scheduling.

The remote backend speaks an OpenAI-style chat-completion wire protocol:
POST {model, temperature, messages} to the endpoint, read the first choice's
message content, with exponential-backoff retries on transport and throttle
failures. The API key comes from the GRADEGUARD_API_KEY environment variable.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import requests

from .errors import BackendTimeout, BackendUnavailable, ConfigError
from .grades import clamp, quantize_half
from .prompting import RenderedPrompt, format_reply, parse_reply

API_KEY_ENV = "GRADEGUARD_API_KEY"

# Degenerate reply used when the mock simulates an incoherent high-temperature
# output; deliberately contains no extractable numeral.
GARBLED_REPLY = "!!@@## the the the grade grade cannot cannot parse ###"


@dataclass(frozen=True)
class BackendConfig:
    backend_kind: str = "mock"            # {"remote", "mock"}
    model_id: str = "mock-grader"
    temperature: float = 0.0              # in [0.0, 2.0]
    endpoint_url: str = ""
    max_retries: int = 3
    parallelism_limit: int = 4
    request_timeout: float = 30.0         # seconds
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.temperature <= 2.0):
            raise ConfigError(f"temperature {self.temperature} outside [0.0, 2.0]")
        if self.backend_kind not in ("remote", "mock"):
            raise ConfigError(f"unknown backend_kind {self.backend_kind!r}")

    def at_temperature(self, temperature: float) -> "BackendConfig":
        return BackendConfig(backend_kind=self.backend_kind, model_id=self.model_id,
                             temperature=temperature, endpoint_url=self.endpoint_url,
                             max_retries=self.max_retries,
                             parallelism_limit=self.parallelism_limit,
                             request_timeout=self.request_timeout, seed=self.seed)


@dataclass(frozen=True)
class GradeReply:
    raw_text: str
    parsed_grade: float | None           # None == unparseable
    latency: float
    repetition_index: int
    feedback: str = ""


@dataclass(frozen=True)
class MockProfile:
    """Noise law for the mock backend.

    sd(record, T) = base_noise_sd + difficulty_map.get(record, 0)
                  + temperature_gain * T
                  + u_curve_gain * |T - u_curve_center|   (if a center is set)

    The u-curve term lets experiments inject a noise profile minimized at a
    chosen temperature. Unparseable replies occur with probability scaling
    linearly from 0 at T=0 to unparseable_rate_at_t2 at T=2.
    """
    base_noise_sd: float = 0.0
    difficulty_map: dict[str, float] = field(default_factory=dict)
    temperature_gain: float = 0.0
    unparseable_rate_at_t2: float = 0.0
    u_curve_center: float | None = None
    u_curve_gain: float = 0.0

    def __post_init__(self):
        for name in ("base_noise_sd", "temperature_gain", "unparseable_rate_at_t2", "u_curve_gain"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for rid, sd in self.difficulty_map.items():
            if sd < 0:
                raise ConfigError(f"difficulty_map[{rid!r}] must be >= 0")

    def noise_sd(self, record_id: str, temperature: float) -> float:
        sd = (self.base_noise_sd + self.difficulty_map.get(record_id, 0.0)
              + self.temperature_gain * temperature)
        if self.u_curve_center is not None:
            sd += self.u_curve_gain * abs(temperature - self.u_curve_center)
        return sd

    def unparseable_probability(self, temperature: float) -> float:
        return self.unparseable_rate_at_t2 * temperature / 2.0

    @classmethod
    def from_file(cls, path: str | Path) -> "MockProfile":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            base_noise_sd=data.get("base_noise_sd", 0.0),
            difficulty_map=dict(data.get("difficulty_map", {})),
            temperature_gain=data.get("temperature_gain", 0.0),
            unparseable_rate_at_t2=data.get("unparseable_rate_at_t2", 0.0),
            u_curve_center=data.get("u_curve_center"),
            u_curve_gain=data.get("u_curve_gain", 0.0),
        )


class Backend(Protocol):
    def grade_once(self, config: BackendConfig, prompt: RenderedPrompt,
                   repetition_index: int) -> GradeReply: ...


def _request_rng(seed: int, record_id: str, repetition_index: int,
                 temperature: float) -> np.random.Generator:
    key = f"{seed}|{record_id}|{repetition_index}|{temperature!r}".encode()
    digest = hashlib.sha256(key).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


class MockBackend:
    """Seeded stochastic grader; needs the true grades to perturb."""

    def __init__(self, profile: MockProfile, truths: dict[str, float]):
        self.profile = profile
        self.truths = truths

    def grade_once(self, config: BackendConfig, prompt: RenderedPrompt,
                   repetition_index: int) -> GradeReply:
        if repetition_index < 1:
            raise ValueError("repetition_index must be >= 1")
        true_grade = self.truths[prompt.record_id]
        rng = _request_rng(config.seed, prompt.record_id, repetition_index,
                           config.temperature)
        # Draw order is part of the determinism contract: unparseable coin first.
        garbled = rng.random() < self.profile.unparseable_probability(config.temperature)
        sd = self.profile.noise_sd(prompt.record_id, config.temperature)
        eps = rng.normal(0.0, sd) if sd > 0 else 0.0
        if garbled:
            return GradeReply(raw_text=GARBLED_REPLY, parsed_grade=None,
                              latency=0.0, repetition_index=repetition_index)
        grade = quantize_half(clamp(true_grade + eps))
        feedback = f"mock grading of record {prompt.record_id}"
        return GradeReply(raw_text=format_reply(grade, feedback),
                          parsed_grade=grade, latency=0.0,
                          repetition_index=repetition_index, feedback=feedback)


class RemoteBackend:
    """OpenAI-style chat-completion client with exponential-backoff retries."""

    RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, session: requests.Session | None = None,
                 backoff_base: float = 0.5, backoff_cap: float = 30.0):
        self.session = session or requests.Session()
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap

    def grade_once(self, config: BackendConfig, prompt: RenderedPrompt,
                   repetition_index: int) -> GradeReply:
        if repetition_index < 1:
            raise ValueError("repetition_index must be >= 1")
        payload = {
            "model": config.model_id,
            "temperature": config.temperature,
            "messages": [{"role": "user", "content": prompt.text}],
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        jitter = random.Random(f"{config.seed}|{prompt.record_id}|{repetition_index}")
        last_error: Exception | None = None
        start = time.monotonic()
        for attempt in range(config.max_retries + 1):
            if attempt:
                delay = min(self.backoff_cap,
                            self.backoff_base * 2 ** (attempt - 1))
                time.sleep(delay * (0.5 + jitter.random()))
            try:
                resp = self.session.post(config.endpoint_url, json=payload,
                                         headers=headers,
                                         timeout=config.request_timeout)
            except requests.Timeout as exc:
                last_error = BackendTimeout(str(exc))
                continue
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = BackendUnavailable(
                    f"HTTP {resp.status_code} from {config.endpoint_url}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(
                    f"HTTP {resp.status_code} from {config.endpoint_url}: {resp.text[:200]}")
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
            parsed = parse_reply(text)
            return GradeReply(raw_text=text, parsed_grade=parsed.grade,
                              latency=time.monotonic() - start,
                              repetition_index=repetition_index,
                              feedback=parsed.feedback)
        raise BackendUnavailable(
            f"retries exhausted after {config.max_retries + 1} attempts: {last_error}")


def make_backend(config: BackendConfig, profile: MockProfile | None = None,
                 truths: dict[str, float] | None = None) -> Backend:
    if config.backend_kind == "mock":
        if truths is None:
            raise ConfigError("mock backend needs the corpus truths")
        return MockBackend(profile or MockProfile(), truths)
    return RemoteBackend()


def grade_once(backend: Backend, config: BackendConfig, prompt: RenderedPrompt,
               repetition_index: int) -> GradeReply:
    return backend.grade_once(config, prompt, repetition_index)


def grade_repeated(backend: Backend, config: BackendConfig,
                   prompt: RenderedPrompt, t: int = 10) -> list[GradeReply]:
    """Grade the same prompt t times, at most parallelism_limit in flight.

    Output preserves repetition order 1..t. A repetition whose retries are
    exhausted is kept as an Unparseable reply rather than sinking the batch;
    only when every repetition fails is BackendUnavailable raised, since
    there is nothing left to aggregate.
    """
    if t < 2:
        raise ValueError("t must be >= 2")

    failures: list[Exception] = []

    def one(rep: int) -> GradeReply:
        try:
            return backend.grade_once(config, prompt, rep)
        except (BackendUnavailable, BackendTimeout) as exc:
            failures.append(exc)
            return GradeReply(raw_text=f"<failed: {exc}>", parsed_grade=None,
                              latency=0.0, repetition_index=rep)

    workers = max(1, config.parallelism_limit)
    if workers == 1:
        replies = [one(rep) for rep in range(1, t + 1)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            replies = list(pool.map(one, range(1, t + 1)))
    if len(failures) == t:
        raise BackendUnavailable(
            f"all {t} repetitions failed; first error: {failures[0]}")
    return replies
