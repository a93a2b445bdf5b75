"""Temperature tuning: sweep the decoding temperature, score by RMSE.

Each grid temperature grades the whole (sampled) corpus t times per record;
the temperature whose per-record mean grades minimize RMSE against the true
grades wins, ties going to the lower temperature. Sweeping runs on the
score-band sample rather than the full corpus: the signal is the same and
the grading cost is a fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backends import Backend, BackendConfig, MockProfile, grade_repeated, make_backend
from .corpus import Corpus
from .errors import BackendUnavailable
from .metrics import aggregate_replies, mae, rmse
from .prompting import PromptTemplate, render_prompt

DEFAULT_TEMPERATURE_GRID = tuple(round(0.1 * i, 1) for i in range(21))  # 0.0 .. 2.0


@dataclass(frozen=True)
class SweepPoint:
    temperature: float
    rmse: float | None
    mae: float | None
    unparseable_fraction: float
    failed_records: int
    valid: bool


@dataclass(frozen=True)
class TemperatureSweepResult:
    points: tuple[SweepPoint, ...]
    best_temperature: float


def sweep_temperature(sampled: Corpus, config: BackendConfig,
                      grid: list[float] | tuple[float, ...] = DEFAULT_TEMPERATURE_GRID,
                      t: int = 10, backend: Backend | None = None,
                      template: PromptTemplate | None = None,
                      profile: MockProfile | None = None) -> TemperatureSweepResult:
    """Evaluate every grid temperature and select the RMSE minimizer.

    A record whose batch fails outright (or parses nothing) counts as failed
    for that temperature; a point with more than half its records failed is
    marked invalid and excluded from selection.
    """
    if not sampled.records:
        raise ValueError("cannot sweep an empty corpus")
    if not grid:
        raise ValueError("temperature grid is empty")
    for temp in grid:
        if not (0.0 <= temp <= 2.0):
            raise ValueError(f"grid temperature {temp} outside [0.0, 2.0]")

    backend = backend or make_backend(config, profile=profile, truths=sampled.truths())
    template = template or PromptTemplate()

    points: list[SweepPoint] = []
    for temp in grid:
        cfg = config.at_temperature(temp)
        pairs: list[tuple[float, float]] = []
        unparseable = 0
        failed = 0
        for rec in sampled.records:
            prompt = render_prompt(template, rec)
            try:
                replies = grade_repeated(backend, cfg, prompt, t)
            except BackendUnavailable:
                failed += 1
                unparseable += t
                continue
            agg = aggregate_replies(rec.record_id, replies, t)
            unparseable += agg.unparseable_count
            if not agg.grades:
                failed += 1
                continue
            pairs.append((agg.mean_grade, rec.true_grade))
        valid = failed <= 0.5 * len(sampled.records)
        points.append(SweepPoint(
            temperature=temp,
            rmse=rmse(pairs) if pairs else None,
            mae=mae(pairs) if pairs else None,
            unparseable_fraction=unparseable / (len(sampled.records) * t),
            failed_records=failed,
            valid=valid and bool(pairs)))

    candidates = [p for p in points if p.valid and p.rmse is not None]
    if not candidates:
        raise BackendUnavailable("every temperature point was invalid")
    best = min(candidates, key=lambda p: (p.rmse, p.temperature))
    return TemperatureSweepResult(points=tuple(points),
                                  best_temperature=best.temperature)
