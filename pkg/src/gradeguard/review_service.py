"""HTTP review queue for routed answers.

Serves the routed decisions as a review queue, accepts human grades, and
keeps two files in step: an append-only submission log (one JSON line per
submission, flushed immediately, for auditability) and a review-results
document in the exact shape merge_human_grades consumes, rewritten after
every accepted submission so a crash never loses state. Submissions for the
same record resolve last-writer-wins; both attempts stay in the log.
"""

from __future__ import annotations

import json
import math
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import CorruptDecisionsFile
from .grades import is_on_lattice
from .srgm import STATUS_ROUTED

MAX_SAMPLE_FEEDBACKS = 3


@dataclass
class ReviewItem:
    record_id: str
    question_text: str
    reference_answer: str
    student_answer: str
    predicted_mean: float | None
    indecisiveness_score: float | None    # None == could not grade at all
    sample_feedbacks: list[str] = field(default_factory=list)
    status: str = "pending"               # pending | done
    human_grade: float | None = None

    def as_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "question_text": self.question_text,
            "reference_answer": self.reference_answer,
            "student_answer": self.student_answer,
            "predicted_mean": self.predicted_mean,
            "indecisiveness_score": self.indecisiveness_score,
            "sample_feedbacks": self.sample_feedbacks,
            "status": self.status,
            "human_grade": self.human_grade,
        }


def load_review_queue(decisions_path: str | Path) -> tuple[dict[str, ReviewItem], set[str]]:
    """Read a decisions JSON-lines file into (routed items, confident ids)."""
    path = Path(decisions_path)
    if not path.exists():
        raise CorruptDecisionsFile(f"decisions file not found: {path}")
    items: dict[str, ReviewItem] = {}
    confident: set[str] = set()
    try:
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                record_id = row["record_id"]
                if row.get("status") != STATUS_ROUTED:
                    confident.add(record_id)
                    continue
                items[record_id] = ReviewItem(
                    record_id=record_id,
                    question_text=row.get("question_text", ""),
                    reference_answer=row.get("reference_answer", ""),
                    student_answer=row.get("student_answer", ""),
                    predicted_mean=row.get("predicted_mean"),
                    indecisiveness_score=row.get("indecisiveness_score"),
                    sample_feedbacks=list(row.get("sample_feedbacks", []))[:MAX_SAMPLE_FEEDBACKS],
                )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptDecisionsFile(f"{path} line {line_no}: {exc}") from exc
    return items, confident


def _sort_key(item: ReviewItem) -> tuple[float, str]:
    # Most uncertain first; records with no score at all are most uncertain.
    score = item.indecisiveness_score
    return (-math.inf if score is None else -score, item.record_id)


class ReviewState:
    """Queue state plus the two output files; submissions are serialized.

    An existing results file is reloaded on construction so a restarted
    session resumes where the evaluator left off instead of overwriting
    their earlier grades.
    """

    def __init__(self, items: dict[str, ReviewItem], confident_ids: set[str],
                 log_path: Path, results_path: Path):
        self.items = items
        self.confident_ids = confident_ids
        self.log_path = log_path
        self.results_path = results_path
        self.lock = threading.Lock()
        if self.results_path.exists():
            for entry in json.loads(self.results_path.read_text(encoding="utf-8")):
                item = self.items.get(entry.get("record_id"))
                if item is not None and is_on_lattice(entry.get("grade", -1)):
                    item.status = "done"
                    item.human_grade = float(entry["grade"])

    def pending(self) -> list[ReviewItem]:
        return sorted((i for i in self.items.values() if i.status == "pending"),
                      key=_sort_key)

    def progress(self) -> dict[str, int]:
        done = sum(1 for i in self.items.values() if i.status == "done")
        return {"pending": len(self.items) - done, "done": done}

    def submit(self, record_id: str, grade: float) -> ReviewItem:
        with self.lock:
            item = self.items[record_id]
            item.status = "done"
            item.human_grade = grade
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"record_id": record_id, "grade": grade},
                                    sort_keys=True) + "\n")
                fh.flush()
            self.write_results()
            return item

    def write_results(self) -> None:
        results = [{"record_id": i.record_id, "grade": i.human_grade}
                   for i in sorted(self.items.values(), key=lambda i: i.record_id)
                   if i.status == "done"]
        self.results_path.write_text(
            json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class ReviewSubmission(BaseModel):
    record_id: str
    grade: float


def build_app(state: ReviewState, ui_dir: str | Path | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        state.write_results()

    app = FastAPI(title="gradeguard review", lifespan=lifespan)

    @app.get("/api/queue")
    def queue() -> list[dict]:
        return [item.as_dict() for item in state.pending()]

    @app.get("/api/item/{record_id}")
    def item(record_id: str):
        found = state.items.get(record_id)
        if found is None:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown record {record_id!r}"})
        return found.as_dict()

    @app.get("/api/progress")
    def progress() -> dict[str, int]:
        return state.progress()

    @app.post("/api/review")
    def review(submission: ReviewSubmission):
        if not is_on_lattice(submission.grade):
            return JSONResponse(
                status_code=422,
                content={"detail": f"grade {submission.grade} is not a 0.5 "
                                   "multiple in [0, 5]"})
        if submission.record_id in state.confident_ids:
            return JSONResponse(
                status_code=409,
                content={"detail": f"record {submission.record_id!r} was not "
                                   "routed for review"})
        if submission.record_id not in state.items:
            return JSONResponse(
                status_code=404,
                content={"detail": f"unknown record {submission.record_id!r}"})
        item = state.submit(submission.record_id, submission.grade)
        return {"record_id": item.record_id, "status": item.status,
                "grade": item.human_grade}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/")
        def index() -> dict:
            return {"service": "gradeguard review",
                    "endpoints": ["/api/queue", "/api/item/{record_id}",
                                  "/api/review", "/api/progress"]}

    return app


def serve(decisions_path: str | Path, bind_address: str = "127.0.0.1:8787",
          ui_dir: str | Path | None = None,
          log_path: str | Path | None = None,
          results_path: str | Path | None = None) -> None:
    """Run the review service until interrupted; writes results on shutdown."""
    import uvicorn

    from .errors import BindFailure

    decisions_path = Path(decisions_path)
    run_dir = decisions_path.parent
    items, confident = load_review_queue(decisions_path)
    state = ReviewState(
        items, confident,
        log_path=Path(log_path) if log_path else run_dir / "review_log.jsonl",
        results_path=Path(results_path) if results_path else run_dir / "review_results.json",
    )
    app = build_app(state, ui_dir=ui_dir)
    host, _, port_str = bind_address.partition(":")
    try:
        port = int(port_str) if port_str else 8787
    except ValueError:
        raise BindFailure(f"invalid bind address {bind_address!r}") from None
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="warning")
    except OSError as exc:
        raise BindFailure(f"cannot bind {bind_address}: {exc}") from exc
