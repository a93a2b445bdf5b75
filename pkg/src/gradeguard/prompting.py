"""Context-aware prompt construction and reply extraction.

A prompt gives the model an instructor role for the course, the question,
the reference answer as a one-shot benchmark, the student answer, and a
grading policy, then pins the reply to a strict two-line contract::

    GRADE: <number>
    FEEDBACK: <text>

so grade retrieval is pattern-based and unambiguous. Replies that carry no
extractable numeral parse to an Unparseable value rather than raising: the
indecisiveness machinery downstream treats them as a confidence penalty.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import AnswerRecord
from .errors import EmptyField
from .grades import clamp, quantize_half

PLACEHOLDERS = ("{{question}}", "{{reference}}", "{{answer}}")

DEFAULT_ROLE_PREAMBLE = (
    "You are an instructor for the course \"{{course}}\". You are grading a "
    "student's short answer to an exam question."
)

DEFAULT_POLICY_TEXT = (
    "Grading policy: compare the student answer against the reference answer, "
    "which is the full-credit benchmark. Assign a grade between 0 and 5 in "
    "steps of 0.5. Full credit means the student answer covers the substance "
    "of the reference answer; partial credit is allowed for partially correct "
    "answers. Grade the content, not the writing style."
)

DEFAULT_OUTPUT_FORMAT_SPEC = (
    "Reply with exactly two lines and nothing else:\n"
    "GRADE: <number>\n"
    "FEEDBACK: <one or two sentences justifying the grade>"
)


@dataclass(frozen=True)
class PromptTemplate:
    """The three configurable prompt sections plus the course they address.

    custom_template, when set (e.g. loaded from a file), replaces the
    assembled default layout; it must still contain every placeholder.
    """
    role_preamble: str = DEFAULT_ROLE_PREAMBLE
    policy_text: str = DEFAULT_POLICY_TEXT
    output_format_spec: str = DEFAULT_OUTPUT_FORMAT_SPEC
    course: str = "Introduction to Computer Science"
    custom_template: str | None = None

    def text(self) -> str:
        if self.custom_template is not None:
            return self.custom_template
        return (
            f"{self.role_preamble}\n\n"
            "QUESTION:\n{{question}}\n\n"
            "REFERENCE ANSWER (benchmark):\n{{reference}}\n\n"
            "STUDENT ANSWER:\n{{answer}}\n\n"
            f"{self.policy_text}\n\n"
            f"{self.output_format_spec}"
        )

    @classmethod
    def from_file(cls, path: str | Path, course: str = "Introduction to Computer Science") -> "PromptTemplate":
        raw = Path(path).read_text(encoding="utf-8")
        missing = [ph for ph in PLACEHOLDERS if ph not in raw]
        if missing:
            raise EmptyField(f"template {path} lacks placeholders: {missing}")
        return cls(course=course, custom_template=raw)


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    record_id: str


def render_prompt(template: PromptTemplate, record: AnswerRecord) -> RenderedPrompt:
    """Fill the template for one record. Pure in (template, record)."""
    for name in ("question_text", "reference_answer", "student_answer"):
        if not getattr(record, name).strip():
            raise EmptyField(f"record {record.record_id}: {name} is empty")
    text = (template.text()
            .replace("{{course}}", template.course)
            .replace("{{question}}", record.question_text)
            .replace("{{reference}}", record.reference_answer)
            .replace("{{answer}}", record.student_answer))
    return RenderedPrompt(text=text, record_id=record.record_id)


_GRADE_RE = re.compile(r"GRADE:\s*(-?\d+(?:\.\d+)?)")
_FEEDBACK_RE = re.compile(r"FEEDBACK:\s*(.*)", re.DOTALL)


@dataclass(frozen=True)
class ParsedReply:
    """Extraction result; grade is None when the reply was unparseable."""
    grade: float | None
    feedback: str

    @property
    def unparseable(self) -> bool:
        return self.grade is None


def parse_reply(reply_text: str) -> ParsedReply:
    """Extract the first GRADE numeral (clamped to [0,5], snapped to 0.5 steps)
    and the FEEDBACK remainder. No numeral means Unparseable, never an error.
    """
    match = _GRADE_RE.search(reply_text)
    if match is None:
        return ParsedReply(grade=None, feedback="")
    grade = quantize_half(clamp(float(match.group(1))))
    fb_match = _FEEDBACK_RE.search(reply_text, match.end())
    feedback = fb_match.group(1).strip() if fb_match else ""
    return ParsedReply(grade=grade, feedback=feedback)


def format_reply(grade: float, feedback: str) -> str:
    """Render a reply in the contract format (used by backends and tests)."""
    grade_str = str(int(grade)) if grade == int(grade) else str(grade)
    return f"GRADE: {grade_str}\nFEEDBACK: {feedback}"
