"""Scalar statistics of repeated grading runs.

The indecisiveness score of one answer is the Bessel-corrected sample
standard deviation of its repeated grades divided by the fixed normalizer
10; an answer is confident under threshold S_k when its score is <= S_k.
Error metrics (RMSE, MAE), the confident-subset RMSE, and the signed-error
buckets used in the misclassification tables all live here as pure
functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backends import GradeReply
from .errors import EmptyList, TooFewGrades
from .grades import quantize_half

# Eq-style normalizer for the indecisiveness score. Deliberately the literal
# constant 10, not t: every threshold in this repo lives on the same
# normalized scale regardless of the repetition count in use.
IS_NORMALIZER = 10.0


@dataclass(frozen=True)
class RepeatedGrading:
    """Aggregate of the t repeated grades for one answer.

    grades holds the parsed repetitions only; unparseable_count tracks the
    rest. When more than half the repetitions were unparseable (or fewer
    than two parsed), the score is +inf: the model could not grade, which is
    the strongest form of indecisiveness.
    """
    record_id: str
    grades: tuple[float, ...]
    unparseable_count: int
    mean_grade: float
    indecisiveness_score: float
    t: int


def mean_grade(grades: list[float] | tuple[float, ...]) -> float:
    if not grades:
        raise EmptyList("mean of zero grades")
    return math.fsum(grades) / len(grades)


def sample_sd(grades: list[float] | tuple[float, ...], t: int | None = None) -> float:
    """Bessel-corrected standard deviation: sqrt(sum((y - mean)^2) / (t - 1))."""
    n = len(grades)
    t = n if t is None else t
    if n < 2 or t < 2:
        raise TooFewGrades("standard deviation needs at least two grades")
    mean = mean_grade(grades)
    return math.sqrt(math.fsum((g - mean) ** 2 for g in grades) / (t - 1))


def population_sd(grades: list[float] | tuple[float, ...]) -> float:
    """Uncorrected (divide-by-t) standard deviation; reporting convenience."""
    n = len(grades)
    if n < 1:
        raise EmptyList("sd of zero grades")
    mean = mean_grade(grades)
    return math.sqrt(math.fsum((g - mean) ** 2 for g in grades) / n)


def indecisiveness_score(grades: list[float] | tuple[float, ...], t: int) -> float:
    """Normalized dispersion of repeated grades: sample_sd / 10."""
    return sample_sd(grades, t) / IS_NORMALIZER


def confidence_indicator(s: float, threshold: float) -> int:
    """1 when the score is at or below the threshold (boundary is confident)."""
    return 1 if s <= threshold else 0


def aggregate_replies(record_id: str, replies: list[GradeReply], t: int) -> RepeatedGrading:
    """Fold t backend replies into a RepeatedGrading.

    Unparseable repetitions are excluded from the mean and the dispersion;
    if they are the majority (or fewer than two grades parsed), the score is
    overridden to +inf so the answer is forced indecisive.
    """
    parsed = tuple(r.parsed_grade for r in replies if r.parsed_grade is not None)
    unparseable = t - len(parsed)
    if len(parsed) < 2 or unparseable > t / 2:
        mean = mean_grade(parsed) if parsed else math.nan
        return RepeatedGrading(record_id=record_id, grades=parsed,
                               unparseable_count=unparseable, mean_grade=mean,
                               indecisiveness_score=math.inf, t=t)
    return RepeatedGrading(
        record_id=record_id, grades=parsed, unparseable_count=unparseable,
        mean_grade=mean_grade(parsed),
        indecisiveness_score=indecisiveness_score(parsed, len(parsed)), t=t)


def rmse(pairs: list[tuple[float, float]]) -> float:
    """Root-mean-square error over (predicted, true) pairs."""
    if not pairs:
        raise EmptyList("RMSE of zero pairs")
    return math.sqrt(math.fsum((p - t) ** 2 for p, t in pairs) / len(pairs))


def mae(pairs: list[tuple[float, float]]) -> float:
    """Mean absolute error over (predicted, true) pairs."""
    if not pairs:
        raise EmptyList("MAE of zero pairs")
    return math.fsum(abs(p - t) for p, t in pairs) / len(pairs)


def confident_rmse(items: list[tuple[float, float, float]],
                   threshold: float) -> tuple[float | None, int]:
    """RMSE restricted to confident items.

    items are (true_grade, mean_grade, indecisiveness_score) triples. Returns
    (E, N): N is the confident count, E the RMSE of (true, mean) over the
    confident subset, or None when nothing is confident.
    """
    if not items:
        raise EmptyList("confident RMSE of zero items")
    confident = [(truth, mean) for truth, mean, s in items
                 if confidence_indicator(s, threshold)]
    if not confident:
        return None, 0
    err = math.sqrt(math.fsum((truth - mean) ** 2 for truth, mean in confident)
                    / len(confident))
    return err, len(confident)


@dataclass(frozen=True)
class BucketCounts:
    """Signed-error counts over the four ranges [-5,-1), [-1,1]\\{0}, {0}, (1,5]."""
    large_negative: int = 0
    small_nonzero: int = 0
    zero: int = 0
    large_positive: int = 0

    @property
    def total(self) -> int:
        return self.large_negative + self.small_nonzero + self.zero + self.large_positive

    def as_dict(self) -> dict[str, int]:
        return {"[-5,-1)": self.large_negative, "[-1,1]-{0}": self.small_nonzero,
                "{0}": self.zero, "(1,5]": self.large_positive}


def bucket_errors(pairs: list[tuple[float, float]]) -> BucketCounts:
    """Assign each signed error (predicted - true) to exactly one bucket.

    Errors are 0.5 multiples (predictions live on the grade lattice), so the
    interval comparisons below are exact in floating point.
    """
    large_negative = small_nonzero = zero = large_positive = 0
    for predicted, true in pairs:
        err = predicted - true
        if err == 0.0:
            zero += 1
        elif err < -1.0:
            large_negative += 1
        elif err > 1.0:
            large_positive += 1
        else:
            small_nonzero += 1
    return BucketCounts(large_negative=large_negative, small_nonzero=small_nonzero,
                        zero=zero, large_positive=large_positive)


def predicted_grade(mean: float) -> float:
    """Snap a mean-of-repetitions onto the grade lattice (ties round up)."""
    return quantize_half(mean)
