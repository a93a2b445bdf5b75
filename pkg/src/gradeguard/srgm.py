"""Self-reflective grading of the full corpus.

Every record is graded t times at the tuned temperature. Records whose
indecisiveness score stays at or below the calibrated threshold keep their
model grade (the rounded mean of the repetitions); the rest are routed to a
human review queue and stay pending until a review result is merged back.
The run report compares the guarded results against single-shot baselines,
both as RMSE and as signed-error bucket counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .backends import Backend, BackendConfig, MockProfile, grade_once, grade_repeated, make_backend
from .corpus import Corpus
from .errors import BackendTimeout, BackendUnavailable, GradeOutOfScale, NotRouted, UnknownRecord
from .grades import is_on_lattice, quantize_half
from .metrics import BucketCounts, aggregate_replies, bucket_errors, rmse
from .prompting import PromptTemplate, render_prompt

STATUS_CONFIDENT = "confident"
STATUS_ROUTED = "routed"

PROVENANCE_AUTO = "auto"
PROVENANCE_HUMAN = "human"


@dataclass(frozen=True)
class GradeDecision:
    """Outcome for one record: auto-graded or routed for human review."""
    record_id: str
    predicted_mean: float | None
    predicted_grade: float | None
    indecisiveness_score: float
    status: str                           # confident | routed
    final_grade: float | None = None      # None == pending (routed, unreviewed)
    provenance: str | None = None         # auto | human | None while pending
    note: str = ""

    @property
    def pending(self) -> bool:
        return self.status == STATUS_ROUTED and self.final_grade is None


def grade_corpus(corpus: Corpus, config: BackendConfig, t: int, optimal_is: float,
                 backend: Backend | None = None,
                 template: PromptTemplate | None = None,
                 profile: MockProfile | None = None,
                 reply_sink: list | None = None) -> list[GradeDecision]:
    """Grade every record t times and split confident vs routed.

    A record is confident exactly when its indecisiveness score is <= the
    calibrated threshold. Backend failures route the record with a note
    instead of aborting the run. When reply_sink is given, every raw reply
    batch is appended to it so reports stay recomputable offline.
    """
    if optimal_is <= 0:
        raise ValueError("optimal_is must be positive")
    backend = backend or make_backend(config, profile=profile, truths=corpus.truths())
    template = template or PromptTemplate()

    decisions: list[GradeDecision] = []
    for rec in corpus.records:
        prompt = render_prompt(template, rec)
        try:
            replies = grade_repeated(backend, config, prompt, t)
        except (BackendUnavailable, BackendTimeout) as exc:
            decisions.append(GradeDecision(
                record_id=rec.record_id, predicted_mean=None, predicted_grade=None,
                indecisiveness_score=math.inf, status=STATUS_ROUTED,
                note=f"backend failure: {exc}"))
            continue
        if reply_sink is not None:
            reply_sink.append({
                "record_id": rec.record_id,
                "replies": [{"repetition_index": r.repetition_index,
                             "raw_text": r.raw_text,
                             "parsed_grade": r.parsed_grade,
                             "feedback": r.feedback} for r in replies],
            })
        agg = aggregate_replies(rec.record_id, replies, t)
        mean = agg.mean_grade if math.isfinite(agg.mean_grade) else None
        predicted = quantize_half(mean) if mean is not None else None
        if agg.indecisiveness_score <= optimal_is:
            decisions.append(GradeDecision(
                record_id=rec.record_id, predicted_mean=mean,
                predicted_grade=predicted,
                indecisiveness_score=agg.indecisiveness_score,
                status=STATUS_CONFIDENT, final_grade=predicted,
                provenance=PROVENANCE_AUTO))
        else:
            note = ""
            if agg.unparseable_count:
                note = f"{agg.unparseable_count}/{t} repetitions unparseable"
            decisions.append(GradeDecision(
                record_id=rec.record_id, predicted_mean=mean,
                predicted_grade=predicted,
                indecisiveness_score=agg.indecisiveness_score,
                status=STATUS_ROUTED, note=note))
    return decisions


def merge_human_grades(decisions: list[GradeDecision],
                       review_results: list[tuple[str, float]]) -> list[GradeDecision]:
    """Apply human grades to routed decisions; later submissions win.

    Rejects grades for unknown records, grades for records the model kept
    (NotRouted), and grades off the 0.5-point lattice. Unreviewed routed
    records stay pending.
    """
    by_id = {d.record_id: i for i, d in enumerate(decisions)}
    merged = list(decisions)
    for record_id, grade in review_results:
        if record_id not in by_id:
            raise UnknownRecord(f"review result for unknown record {record_id!r}")
        idx = by_id[record_id]
        if merged[idx].status != STATUS_ROUTED:
            raise NotRouted(f"record {record_id!r} was not routed for review")
        if not is_on_lattice(grade):
            raise GradeOutOfScale(
                f"human grade {grade} for {record_id!r} is not a 0.5 multiple in [0, 5]")
        merged[idx] = replace(merged[idx], final_grade=float(grade),
                              provenance=PROVENANCE_HUMAN)
    return merged


def single_shot_baseline(corpus: Corpus, config: BackendConfig, temperature: float,
                         backend: Backend | None = None,
                         template: PromptTemplate | None = None,
                         profile: MockProfile | None = None) -> dict[str, float | None]:
    """One grade per record at the given temperature (repetition index 1).

    This is the no-guardrails comparison point: whatever single reply the
    backend produces, unparseable ones included (as None).
    """
    backend = backend or make_backend(config, profile=profile, truths=corpus.truths())
    template = template or PromptTemplate()
    cfg = config.at_temperature(temperature)
    out: dict[str, float | None] = {}
    for rec in corpus.records:
        prompt = render_prompt(template, rec)
        try:
            reply = grade_once(backend, cfg, prompt, 1)
            out[rec.record_id] = reply.parsed_grade
        except (BackendUnavailable, BackendTimeout):
            out[rec.record_id] = None
    return out


@dataclass(frozen=True)
class RunReport:
    """With/without comparison over one graded corpus."""
    rmse_without_gg: float | None         # single shot, default temperature
    rmse_min_temp: float | None           # single shot, tuned temperature
    rmse_with_gg: float | None            # confident subset, mean of t grades
    rmse_blended: float | None            # all finalized grades (auto + human)
    confident_count: int
    routed_count: int
    pending_count: int
    bucket_counts_without: BucketCounts
    bucket_counts_with: BucketCounts
    reduction_percentages: dict[str, float]
    record_count: int

    def as_dict(self) -> dict:
        return {
            "rmse_without_gg": self.rmse_without_gg,
            "rmse_min_temp": self.rmse_min_temp,
            "rmse_with_gg": self.rmse_with_gg,
            "rmse_blended": self.rmse_blended,
            "confident_count": self.confident_count,
            "routed_count": self.routed_count,
            "pending_count": self.pending_count,
            "bucket_counts_without": self.bucket_counts_without.as_dict(),
            "bucket_counts_with": self.bucket_counts_with.as_dict(),
            "reduction_percentages": self.reduction_percentages,
            "record_count": self.record_count,
        }


def _reduction(without: int, with_: int) -> float:
    if without == 0:
        return 0.0
    return (without - with_) / without * 100.0


def build_report(decisions: list[GradeDecision],
                 baseline_default: dict[str, float | None],
                 baseline_tuned: dict[str, float | None],
                 truths: dict[str, float]) -> RunReport:
    """Assemble the run report from decisions and single-shot baselines.

    The guarded RMSE uses the unrounded mean of the repetitions over the
    confident subset; bucket counts use lattice grades. The blended RMSE
    covers every finalized grade (auto plus merged human ones) and is
    reported separately from the confident-subset figure.
    """
    decision_ids = {d.record_id for d in decisions}
    if decision_ids != set(baseline_default) or decision_ids != set(baseline_tuned):
        raise ValueError("decisions and baselines must cover the same records")

    def baseline_pairs(baseline: dict[str, float | None]) -> list[tuple[float, float]]:
        return [(g, truths[rid]) for rid, g in baseline.items() if g is not None]

    default_pairs = baseline_pairs(baseline_default)
    tuned_pairs = baseline_pairs(baseline_tuned)

    confident = [d for d in decisions if d.status == STATUS_CONFIDENT]
    confident_mean_pairs = [(d.predicted_mean, truths[d.record_id]) for d in confident]
    confident_grade_pairs = [(d.predicted_grade, truths[d.record_id]) for d in confident]
    final_pairs = [(d.final_grade, truths[d.record_id])
                   for d in decisions if d.final_grade is not None]

    buckets_without = bucket_errors(default_pairs)
    buckets_with = bucket_errors(confident_grade_pairs)
    without_d = buckets_without.as_dict()
    with_d = buckets_with.as_dict()

    return RunReport(
        rmse_without_gg=rmse(default_pairs) if default_pairs else None,
        rmse_min_temp=rmse(tuned_pairs) if tuned_pairs else None,
        rmse_with_gg=rmse(confident_mean_pairs) if confident_mean_pairs else None,
        rmse_blended=rmse(final_pairs) if final_pairs else None,
        confident_count=len(confident),
        routed_count=len(decisions) - len(confident),
        pending_count=sum(1 for d in decisions if d.pending),
        bucket_counts_without=buckets_without,
        bucket_counts_with=buckets_with,
        reduction_percentages={key: _reduction(without_d[key], with_d[key])
                               for key in without_d},
        record_count=len(decisions),
    )


def format_report_tables(report: RunReport) -> str:
    """Human-readable text rendering of the report (RMSE + bucket tables)."""
    lines = []
    lines.append("RMSE and confident-instances summary")
    lines.append("-" * 68)
    lines.append(f"{'single shot, default temperature':<44}"
                 f"{_fmt(report.rmse_without_gg):>12}")
    lines.append(f"{'single shot, tuned temperature':<44}"
                 f"{_fmt(report.rmse_min_temp):>12}")
    lines.append(f"{'with grade guard (confident subset, mean of t)':<44}"
                 f"{_fmt(report.rmse_with_gg):>12}")
    lines.append(f"{'blended after review merge':<44}"
                 f"{_fmt(report.rmse_blended):>12}")
    lines.append(f"{'confident instances':<44}{report.confident_count:>12}")
    lines.append(f"{'routed instances':<44}{report.routed_count:>12}")
    lines.append(f"{'pending review':<44}{report.pending_count:>12}")
    lines.append("")
    lines.append("Misclassification buckets (error = predicted - true)")
    lines.append("-" * 68)
    lines.append(f"{'range':<14}{'without':>12}{'with':>12}{'reduction %':>16}")
    without = report.bucket_counts_without.as_dict()
    with_ = report.bucket_counts_with.as_dict()
    for key in without:
        lines.append(f"{key:<14}{without[key]:>12}{with_[key]:>12}"
                     f"{report.reduction_percentages[key]:>16.2f}")
    return "\n".join(lines) + "\n"


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"
