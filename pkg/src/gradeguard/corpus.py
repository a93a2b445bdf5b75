"""Short-answer corpus ingestion, cleaning, and score-band sampling.

The corpus is a flat CSV of (question, reference answer, student answer,
true grade) rows. Loading validates the grade lattice and id uniqueness,
cleaning drops answers with tokenization hazards, and sampling draws one
answer per grade band per question so downstream calibration sees every
level of correctness at a fraction of the grading cost.
"""

from __future__ import annotations

import csv
import json
import math
import random
import string
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateId, GradeOutOfScale, ParseError
from .grades import GRADE_MAX, GRADE_MIN, is_on_lattice

CSV_HEADER = ["record_id", "question_id", "question_text",
              "reference_answer", "student_answer", "true_grade"]


@dataclass(frozen=True)
class AnswerRecord:
    """One (question, reference answer, student answer, true grade) quadruple."""
    record_id: str
    question_id: str
    question_text: str
    reference_answer: str
    student_answer: str
    true_grade: float


@dataclass(frozen=True)
class Removal:
    record_id: str
    rule: str


@dataclass(frozen=True)
class Provenance:
    source: str
    removals: tuple[Removal, ...] = ()


@dataclass(frozen=True)
class Corpus:
    """Ordered, immutable collection of answer records plus where they came from."""
    records: tuple[AnswerRecord, ...]
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def question_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.question_id, None)
        return list(seen)

    def truths(self) -> dict[str, float]:
        return {rec.record_id: rec.true_grade for rec in self.records}


@dataclass(frozen=True)
class GradeBand:
    """Half-open score band; only the lowest band includes its lower edge."""
    lower: float
    upper: float
    lower_inclusive: bool = False

    def contains(self, grade: float) -> bool:
        if self.lower_inclusive:
            return self.lower <= grade <= self.upper
        return self.lower < grade <= self.upper


# The five canonical bands [0,1], (1,2], (2,3], (3,4], (4,5].
BANDS = (
    GradeBand(0.0, 1.0, lower_inclusive=True),
    GradeBand(1.0, 2.0),
    GradeBand(2.0, 3.0),
    GradeBand(3.0, 4.0),
    GradeBand(4.0, 5.0),
)


def band_for_grade(grade: float) -> GradeBand:
    """Map a grade to its unique band: [0,1] for g <= 1, else (n, n+1] with n = ceil(g)-1."""
    if not (GRADE_MIN <= grade <= GRADE_MAX):
        raise GradeOutOfScale(f"grade {grade} outside [{GRADE_MIN}, {GRADE_MAX}]")
    if grade <= 1.0:
        return BANDS[0]
    return BANDS[math.ceil(grade) - 1]


@dataclass(frozen=True)
class CleaningRules:
    """What counts as a malformed student answer.

    allowed_chars defaults to printable ASCII; anything outside it is a
    tokenization hazard. max_token_run flags answers with runs of >= that
    many non-space characters (missing spaces).
    """
    allowed_chars: frozenset[str] = frozenset(string.printable)
    max_token_run: int = 25

    RULE_DISALLOWED = "disallowed character"
    RULE_LONG_RUN = "long character run"
    RULE_EMPTY = "empty field"

    def violation(self, text: str) -> str | None:
        if not text.strip():
            return self.RULE_EMPTY
        for ch in text:
            if ch not in self.allowed_chars:
                return self.RULE_DISALLOWED
        run = 0
        for ch in text:
            run = 0 if ch.isspace() else run + 1
            if run >= self.max_token_run:
                return self.RULE_LONG_RUN
        return None


def _parse_grade(raw: str, row: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"true_grade {raw!r} is not a decimal numeral", row=row,
                         column="true_grade") from None
    if not is_on_lattice(value):
        raise GradeOutOfScale(
            f"row {row}: true_grade {raw} is not a 0.5 multiple in [0, 5]")
    return value


def load_corpus(path: str | Path, fmt: str = "csv") -> Corpus:
    """Load a corpus file; one AnswerRecord per data row.

    Raises ParseError with row/column context on malformed input, DuplicateId
    on repeated record_ids, and GradeOutOfScale on off-lattice grades. An
    empty data section yields an empty corpus.
    """
    path = Path(path)
    if fmt != "csv":
        raise ParseError(f"unsupported corpus format {fmt!r}")
    if not path.exists():
        raise ParseError(f"corpus file not found: {path}")

    records: list[AnswerRecord] = []
    seen_ids: set[str] = set()
    reference_by_question: dict[str, str] = {}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("corpus file is empty (missing header)", row=1) from None
        if header != CSV_HEADER:
            raise ParseError(
                f"unexpected header {header!r}; expected {CSV_HEADER!r}", row=1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(
                    f"expected {len(CSV_HEADER)} fields, got {len(row)}", row=row_no)
            record_id, question_id, question_text, reference, answer, raw_grade = row
            if record_id in seen_ids:
                raise DuplicateId(f"record_id {record_id!r} appears more than once")
            seen_ids.add(record_id)
            grade = _parse_grade(raw_grade, row_no)
            known_ref = reference_by_question.setdefault(question_id, reference)
            if known_ref != reference:
                raise ParseError(
                    f"question {question_id!r} has two different reference answers",
                    row=row_no, column="reference_answer")
            records.append(AnswerRecord(
                record_id=record_id,
                question_id=question_id,
                question_text=question_text,
                reference_answer=reference,
                student_answer=answer,
                true_grade=grade,
            ))

    return Corpus(records=tuple(records), provenance=Provenance(source=str(path)))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out in the load_corpus CSV format."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in corpus.records:
            grade = rec.true_grade
            grade_str = str(int(grade)) if grade == int(grade) else str(grade)
            writer.writerow([rec.record_id, rec.question_id, rec.question_text,
                             rec.reference_answer, rec.student_answer, grade_str])


def clean_corpus(corpus: Corpus, rules: CleaningRules | None = None) -> Corpus:
    """Drop records whose student answer violates a cleaning rule.

    Total: never raises. Every removal is recorded in the returned corpus's
    provenance so the cleaning is auditable.
    """
    rules = rules or CleaningRules()
    kept: list[AnswerRecord] = []
    removals = list(corpus.provenance.removals)
    for rec in corpus.records:
        rule = rules.violation(rec.student_answer)
        if rule is None and not (rec.question_text.strip() and rec.reference_answer.strip()):
            rule = CleaningRules.RULE_EMPTY
        if rule is None:
            kept.append(rec)
        else:
            removals.append(Removal(record_id=rec.record_id, rule=rule))
    return Corpus(records=tuple(kept),
                  provenance=Provenance(source=corpus.provenance.source,
                                        removals=tuple(removals)))


def write_cleaning_report(corpus: Corpus, path: str | Path) -> None:
    """Emit the removal list as a JSON array of {record_id, rule} entries."""
    entries = [{"record_id": r.record_id, "rule": r.rule}
               for r in corpus.provenance.removals]
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _question_sort_key(question_id: str):
    parts = question_id.split(".")
    try:
        return (0, tuple(int(p) for p in parts), "")
    except ValueError:
        return (1, (), question_id)


def sbus_sample(corpus: Corpus, seed: int) -> Corpus:
    """One uniformly chosen answer per populated grade band per question.

    Deterministic for a fixed seed; output ordered by (question_id, band
    lower bound). Bands with no eligible answer contribute nothing.
    """
    if not corpus.records:
        raise ParseError("cannot sample an empty corpus")
    rng = random.Random(seed)
    by_question: dict[str, list[AnswerRecord]] = {}
    for rec in corpus.records:
        by_question.setdefault(rec.question_id, []).append(rec)

    chosen: list[AnswerRecord] = []
    for question_id in sorted(by_question, key=_question_sort_key):
        recs = by_question[question_id]
        for band in BANDS:
            eligible = [r for r in recs if band.contains(r.true_grade)]
            if eligible:
                chosen.append(rng.choice(eligible))
    return Corpus(records=tuple(chosen),
                  provenance=Provenance(
                      source=f"{corpus.provenance.source} (sbus seed={seed})",
                      removals=corpus.provenance.removals))
