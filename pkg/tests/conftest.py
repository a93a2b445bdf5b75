"""Shared fixtures: a small five-band corpus, CSV helpers, and the builder
for the seeded heteroscedastic mock experiment used by the CLI and
acceptance tests."""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

import pytest

from gradeguard.corpus import AnswerRecord, Corpus, Provenance, CSV_HEADER

QUESTION_16 = "Where can a variable be declared inside a program?"
REFERENCE_16 = ("A variable may be declared at any point in the enclosing scope "
                "before its first use, either globally before the entry point or "
                "locally inside the block that uses it.")

# Five answers to the same question, one true grade per score band.
FIVE_BAND_ROWS = [
    ("r1", "1.6", QUESTION_16, REFERENCE_16,
     "Right after you pick the type of the variable.", 1.0),
    ("r2", "1.6", QUESTION_16, REFERENCE_16,
     "At the top of the file, before the entry point runs.", 2.0),
    ("r3", "1.6", QUESTION_16, REFERENCE_16,
     "Inside classes and inside methods.", 2.5),
    ("r4", "1.6", QUESTION_16, REFERENCE_16,
     "Any place in the surrounding scope as long as it comes before the use.", 3.5),
    ("r5", "1.6", QUESTION_16, REFERENCE_16,
     "Either globally before the entry point or within a method; a method-scoped "
     "variable is declared at the start of that method and is visible only there.", 5.0),
]


def write_corpus_csv(path: Path, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row)
    return path


def make_corpus(rows) -> Corpus:
    records = tuple(AnswerRecord(record_id=r[0], question_id=r[1], question_text=r[2],
                                 reference_answer=r[3], student_answer=r[4],
                                 true_grade=float(r[5]))
                    for r in rows)
    return Corpus(records=records, provenance=Provenance(source="<test>"))


@pytest.fixture
def five_band_corpus() -> Corpus:
    return make_corpus(FIVE_BAND_ROWS)


@pytest.fixture
def five_band_csv(tmp_path: Path) -> Path:
    return write_corpus_csv(tmp_path / "corpus.csv", FIVE_BAND_ROWS)


def heteroscedastic_experiment(root: Path, n_questions: int = 50,
                               per_question: int = 10,
                               high_noise_fraction: float = 0.2,
                               base_sd: float = 0.3, high_sd: float = 1.5,
                               seed: int = 1234, t: int = 10,
                               temperature_grid=(0.0, 0.7, 1.4),
                               threshold_grid=None) -> dict:
    """Lay out corpus CSV, mock profile, and run config for a mock experiment.

    True grades stay in the middle of the scale (1.5..3.5) so the configured
    noise sds are the actual grade dispersions: grades near 0 or 5 would have
    their noise clamped away and the two populations would blur together. A
    seeded subset of the records gets extra difficulty noise
    (base_sd + extra == high_sd). The threshold sweep starts at the exclusion
    cutoff (below it the method distrusts the statistics anyway) and ends
    just past the largest score the noise law can produce (~0.21 at t=10).
    """
    rng = random.Random(seed)
    grade_pool = [1.5, 2.0, 2.5, 3.0, 3.5]
    rows = []
    for q in range(n_questions):
        for i in range(per_question):
            grade = grade_pool[i % len(grade_pool)]
            rows.append((f"q{q:03d}a{i}", f"{q + 1}.1", f"Question {q + 1}?",
                         f"Reference answer for question {q + 1}.",
                         f"Student answer {i} to question {q + 1}.", grade))
    record_ids = [r[0] for r in rows]
    high_noise_ids = sorted(rng.sample(record_ids,
                                       k=int(high_noise_fraction * len(record_ids))))

    corpus_path = root / "corpus.csv"
    write_corpus_csv(corpus_path, rows)

    profile_path = root / "profile.json"
    profile_path.write_text(json.dumps({
        "base_noise_sd": base_sd,
        "difficulty_map": {rid: high_sd - base_sd for rid in high_noise_ids},
    }, indent=2), encoding="utf-8")

    if threshold_grid is None:
        threshold_grid = [round(0.02 + 0.005 * i, 3) for i in range(47)]
    config_path = root / "config.toml"
    config_path.write_text(
        f'corpus_path = "{corpus_path}"\n'
        f'run_dir = "{root / "run"}"\n'
        f"seed = {seed}\n"
        f"t = {t}\n"
        'backend_kind = "mock"\n'
        f'mock_profile_path = "{profile_path}"\n'
        f"temperature_grid = {list(temperature_grid)}\n"
        f"threshold_grid = {threshold_grid}\n"
        "exclusion_cutoff = 0.02\n"
        'threshold_mode = "ncal-inflection"\n',
        encoding="utf-8")

    return {"corpus_path": corpus_path, "profile_path": profile_path,
            "config_path": config_path, "record_ids": record_ids,
            "high_noise_ids": set(high_noise_ids), "rows": rows}
