"""Pipeline entry point.

Subcommands mirror the pipeline stages and each one reads its inputs from
and writes its artifacts into the run directory::

    sample      corpus.csv -> cleaning_report.json, sampled.csv
    tune        sampled.csv -> sweep.json
    calibrate   sampled.csv + sweep.json -> calibration.json
    grade       corpus.csv + calibration.json -> decisions.jsonl,
                replies.jsonl, baselines.json
    review serve decisions.jsonl -> review_log.jsonl, review_results.json
    merge       decisions.jsonl + results file -> decisions_merged.jsonl
    report      decisions(+merged) + baselines.json -> report.json, report.txt
    plot        sweep.json + calibration.json -> SVG figures

Every artifact embeds (or is tracked in run_manifest.json with) the run
seed and the config hash, and the whole pipeline is deterministic for a
fixed seed when run against the mock backend: no timestamps, no absolute
paths inside artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from . import crm, irm, srgm
from .backends import MockProfile, make_backend
from .config import RunConfig, load_config
from .corpus import clean_corpus, load_corpus, save_corpus, sbus_sample, write_cleaning_report
from .errors import GradeGuardError
from .prompting import PromptTemplate
from .srgm import GradeDecision


class MissingArtifact(GradeGuardError):
    """A subcommand ran before the stage that produces its input."""


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def _update_manifest(run_dir: Path, cfg: RunConfig, names: list[str]) -> None:
    manifest_path = run_dir / "run_manifest.json"
    manifest = {"artifacts": {}}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for name in names:
        digest = hashlib.sha256((run_dir / name).read_bytes()).hexdigest()
        manifest["artifacts"][name] = {
            "seed": cfg.seed, "config_hash": cfg.config_hash(), "sha256": digest}
    _dump_json(manifest, manifest_path)


def _require(run_dir: Path, name: str) -> Path:
    path = run_dir / name
    if not path.exists():
        raise MissingArtifact(f"missing {name}; run the producing stage first")
    return path


def _load_profile(cfg: RunConfig) -> MockProfile:
    if cfg.mock_profile_path:
        return MockProfile.from_file(cfg.mock_profile_path)
    return MockProfile()


def _load_template(cfg: RunConfig) -> PromptTemplate:
    if cfg.template_path:
        return PromptTemplate.from_file(cfg.template_path, course=cfg.course)
    return PromptTemplate(course=cfg.course)


def _cleaned_corpus(cfg: RunConfig):
    return clean_corpus(load_corpus(cfg.corpus_path))


def cmd_sample(cfg: RunConfig, run_dir: Path) -> None:
    cleaned = _cleaned_corpus(cfg)
    write_cleaning_report(cleaned, run_dir / "cleaning_report.json")
    sampled = sbus_sample(cleaned, seed=cfg.seed)
    save_corpus(sampled, run_dir / "sampled.csv")
    _update_manifest(run_dir, cfg, ["cleaning_report.json", "sampled.csv"])
    print(f"sampled {len(sampled)} of {len(cleaned)} cleaned records "
          f"({len(cleaned.provenance.removals)} removed by cleaning)")


def cmd_tune(cfg: RunConfig, run_dir: Path) -> None:
    sampled = load_corpus(_require(run_dir, "sampled.csv"))
    backend = make_backend(cfg.backend_config(), profile=_load_profile(cfg),
                           truths=sampled.truths())
    result = crm.sweep_temperature(
        sampled, cfg.backend_config(), grid=cfg.temperature_grid, t=cfg.t,
        backend=backend, template=_load_template(cfg))
    _dump_json({
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "points": [{"temperature": p.temperature, "rmse": p.rmse, "mae": p.mae,
                    "unparseable_fraction": p.unparseable_fraction,
                    "failed_records": p.failed_records, "valid": p.valid}
                   for p in result.points],
        "best_temperature": result.best_temperature,
    }, run_dir / "sweep.json")
    _update_manifest(run_dir, cfg, ["sweep.json"])
    print(f"best temperature {result.best_temperature}")


def _grade_items(corpus, cfg: RunConfig, temperature: float):
    """Grade every record t times at one temperature; return calibration items."""
    from .backends import grade_repeated
    from .metrics import aggregate_replies
    from .prompting import render_prompt

    backend = make_backend(cfg.backend_config(temperature),
                           profile=_load_profile(cfg), truths=corpus.truths())
    template = _load_template(cfg)
    bcfg = cfg.backend_config(temperature)
    items = []
    for rec in corpus.records:
        replies = grade_repeated(backend, bcfg, render_prompt(template, rec), cfg.t)
        agg = aggregate_replies(rec.record_id, replies, cfg.t)
        if math.isfinite(agg.mean_grade):
            items.append((rec.true_grade, agg.mean_grade, agg.indecisiveness_score))
    return items


def _fit_to_json(fit: irm.LogisticFit) -> dict:
    return {"L": fit.L, "k": fit.k, "t0": fit.t0,
            "residual_rms": fit.residual_rms, "degenerate": fit.degenerate}


def _poly_to_json(fit: irm.PolyFit) -> dict:
    return {"coeffs": list(fit.coeffs), "residual_rms": fit.residual_rms}


def cmd_calibrate(cfg: RunConfig, run_dir: Path) -> None:
    sampled = load_corpus(_require(run_dir, "sampled.csv"))
    sweep_doc = json.loads(_require(run_dir, "sweep.json").read_text(encoding="utf-8"))
    best_temp = sweep_doc["best_temperature"]
    items = _grade_items(sampled, cfg, best_temp)
    result = irm.calibrate(items, grid=cfg.threshold_grid,
                           exclusion_cutoff=cfg.exclusion_cutoff)
    _dump_json({
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "best_temperature": best_temp,
        "optimal_is_scal": result.optimal_is_scal,
        "optimal_is_ncal": result.optimal_is_ncal,
        "ncal_fallback": result.ncal_fallback,
        "excluded_points": list(result.excluded_points),
        "domain": [result.scal_curve.domain[0], result.scal_curve.domain[1]],
        "sweep": [{"S_k": p.S_k, "N_k": p.N_k, "E_k": p.E_k, "penalty": p.penalty,
                   "E_prime": p.E_prime, "Z_E": p.Z_E} for p in result.sweep],
        "scal": {"logistic": _fit_to_json(result.scal_curve.rmse_fit),
                 "poly": _poly_to_json(result.scal_curve.penalty_fit)},
        "ncal": {"logistic": _fit_to_json(result.ncal_curve.rmse_fit),
                 "poly": _poly_to_json(result.ncal_curve.penalty_fit)},
    }, run_dir / "calibration.json")
    _update_manifest(run_dir, cfg, ["calibration.json"])
    print(f"optimal indecisiveness score: scal-minimum {result.optimal_is_scal:.4f}, "
          f"ncal-inflection {result.optimal_is_ncal:.4f}"
          + (" (fallback to scal minimum)" if result.ncal_fallback else ""))


def _selected_threshold(cfg: RunConfig, calibration: dict,
                        override: float | None) -> float:
    if override is not None:
        return override
    key = ("optimal_is_ncal" if cfg.threshold_mode == "ncal-inflection"
           else "optimal_is_scal")
    return calibration[key]


def _decision_row(decision: GradeDecision, rec, feedbacks: list[str]) -> dict:
    s = decision.indecisiveness_score
    return {
        "record_id": decision.record_id,
        "question_id": rec.question_id,
        "question_text": rec.question_text,
        "reference_answer": rec.reference_answer,
        "student_answer": rec.student_answer,
        "predicted_mean": decision.predicted_mean,
        "predicted_grade": decision.predicted_grade,
        "indecisiveness_score": s if math.isfinite(s) else None,
        "indecisive_override": not math.isfinite(s),
        "status": decision.status,
        "final_grade": decision.final_grade,
        "provenance": decision.provenance,
        "note": decision.note,
        "sample_feedbacks": feedbacks[:3],
    }


def cmd_grade(cfg: RunConfig, run_dir: Path, threshold_override: float | None) -> None:
    calibration = json.loads(_require(run_dir, "calibration.json").read_text(encoding="utf-8"))
    threshold = _selected_threshold(cfg, calibration, threshold_override)
    best_temp = calibration["best_temperature"]
    corpus = _cleaned_corpus(cfg)
    profile = _load_profile(cfg)
    template = _load_template(cfg)
    bcfg = cfg.backend_config(best_temp)
    backend = make_backend(bcfg, profile=profile, truths=corpus.truths())

    reply_sink: list = []
    decisions = srgm.grade_corpus(corpus, bcfg, cfg.t, threshold,
                                  backend=backend, template=template,
                                  reply_sink=reply_sink)

    feedback_by_id = {
        row["record_id"]: [r["feedback"] for r in row["replies"] if r["feedback"]]
        for row in reply_sink}
    by_id = {rec.record_id: rec for rec in corpus.records}
    with (run_dir / "decisions.jsonl").open("w", encoding="utf-8") as fh:
        for decision in decisions:
            row = _decision_row(decision, by_id[decision.record_id],
                                feedback_by_id.get(decision.record_id, []))
            fh.write(json.dumps(row, sort_keys=True, allow_nan=False) + "\n")
    with (run_dir / "replies.jsonl").open("w", encoding="utf-8") as fh:
        for row in reply_sink:
            fh.write(json.dumps(row, sort_keys=True, allow_nan=False) + "\n")

    baseline_default = srgm.single_shot_baseline(
        corpus, bcfg, cfg.default_temperature, backend=backend, template=template)
    baseline_tuned = srgm.single_shot_baseline(
        corpus, bcfg, best_temp, backend=backend, template=template)
    _dump_json({
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "default_temperature": cfg.default_temperature,
        "tuned_temperature": best_temp,
        "threshold": threshold,
        "threshold_mode": cfg.threshold_mode if threshold_override is None else "override",
        "baselines": {rid: {"default": baseline_default[rid],
                            "tuned": baseline_tuned[rid]}
                      for rid in sorted(baseline_default)},
    }, run_dir / "baselines.json")
    _update_manifest(run_dir, cfg,
                     ["decisions.jsonl", "replies.jsonl", "baselines.json"])
    routed = sum(1 for d in decisions if d.status == srgm.STATUS_ROUTED)
    print(f"graded {len(decisions)} records at T={best_temp}, threshold {threshold:.4f}: "
          f"{len(decisions) - routed} confident, {routed} routed")


def _read_decisions(path: Path) -> tuple[list[GradeDecision], list[dict]]:
    rows = []
    decisions = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            rows.append(row)
            s = row["indecisiveness_score"]
            decisions.append(GradeDecision(
                record_id=row["record_id"],
                predicted_mean=row["predicted_mean"],
                predicted_grade=row["predicted_grade"],
                indecisiveness_score=math.inf if s is None else s,
                status=row["status"],
                final_grade=row["final_grade"],
                provenance=row["provenance"],
                note=row.get("note", "")))
    return decisions, rows


def cmd_merge(cfg: RunConfig, run_dir: Path, results_path: str) -> None:
    decisions_path = _require(run_dir, "decisions.jsonl")
    results_file = Path(results_path)
    if not results_file.exists():
        raise MissingArtifact(f"missing review results file {results_path}")
    results_doc = json.loads(results_file.read_text(encoding="utf-8"))
    results = [(entry["record_id"], float(entry["grade"])) for entry in results_doc]

    decisions, rows = _read_decisions(decisions_path)
    merged = srgm.merge_human_grades(decisions, results)
    merged_by_id = {d.record_id: d for d in merged}
    with (run_dir / "decisions_merged.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            decision = merged_by_id[row["record_id"]]
            row = dict(row)
            row["final_grade"] = decision.final_grade
            row["provenance"] = decision.provenance
            fh.write(json.dumps(row, sort_keys=True, allow_nan=False) + "\n")
    _update_manifest(run_dir, cfg, ["decisions_merged.jsonl"])
    still_pending = sum(1 for d in merged if d.pending)
    print(f"merged {len(results)} review results; {still_pending} still pending")


def cmd_report(cfg: RunConfig, run_dir: Path) -> None:
    merged_path = run_dir / "decisions_merged.jsonl"
    decisions_path = merged_path if merged_path.exists() else _require(run_dir, "decisions.jsonl")
    decisions, _ = _read_decisions(decisions_path)
    baselines_doc = json.loads(_require(run_dir, "baselines.json").read_text(encoding="utf-8"))
    corpus = _cleaned_corpus(cfg)
    report = srgm.build_report(
        decisions,
        {rid: vals["default"] for rid, vals in baselines_doc["baselines"].items()},
        {rid: vals["tuned"] for rid, vals in baselines_doc["baselines"].items()},
        corpus.truths())
    _dump_json({"seed": cfg.seed, "config_hash": cfg.config_hash(),
                **report.as_dict()}, run_dir / "report.json")
    text = srgm.format_report_tables(report)
    (run_dir / "report.txt").write_text(text, encoding="utf-8")
    _update_manifest(run_dir, cfg, ["report.json", "report.txt"])
    print(text, end="")


def cmd_plot(cfg: RunConfig, run_dir: Path) -> None:
    from . import plots

    produced = []
    sweep_path = run_dir / "sweep.json"
    if sweep_path.exists():
        sweep = json.loads(sweep_path.read_text(encoding="utf-8"))
        plots.plot_temperature_sweep(sweep, run_dir / "sweep.svg", seed=cfg.seed)
        produced.append("sweep.svg")
    cal_path = run_dir / "calibration.json"
    if cal_path.exists():
        cal = json.loads(cal_path.read_text(encoding="utf-8"))
        for mode in ("scal", "ncal"):
            plots.plot_calibration_fits(cal, mode, run_dir / f"fits_{mode}.svg",
                                        seed=cfg.seed)
            plots.plot_cal_curve(cal, mode, run_dir / f"cal_{mode}.svg", seed=cfg.seed)
            produced += [f"fits_{mode}.svg", f"cal_{mode}.svg"]
    if not produced:
        raise MissingArtifact("missing sweep.json and calibration.json; nothing to plot")
    _update_manifest(run_dir, cfg, produced)
    print("wrote " + ", ".join(produced))


def cmd_review_serve(cfg: RunConfig, run_dir: Path, bind: str, ui_dir: str | None) -> None:
    from .review_service import serve

    decisions_path = _require(run_dir, "decisions.jsonl")
    serve(decisions_path, bind_address=bind, ui_dir=ui_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradeguard",
        description="Short-answer grading with repeated sampling, temperature "
                    "tuning, indecisiveness calibration, and human review routing.")
    parser.add_argument("--config", help="TOML run configuration file")
    parser.add_argument("--corpus", help="corpus CSV path (overrides config)")
    parser.add_argument("--run-dir", help="artifact directory (overrides config)")
    parser.add_argument("--seed", type=int, help="run seed (overrides config)")
    parser.add_argument("--threshold-mode", choices=["ncal-inflection", "scal-minimum"],
                        help="which calibrated threshold the grade stage applies")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", help="clean the corpus and draw the score-band sample")
    sub.add_parser("tune", help="sweep temperatures on the sample")
    sub.add_parser("calibrate", help="sweep thresholds and fit the loss curves")
    grade = sub.add_parser("grade", help="grade the full corpus and route uncertain answers")
    grade.add_argument("--threshold", type=float,
                       help="explicit indecisiveness threshold (overrides calibration)")
    review = sub.add_parser("review", help="review-queue service commands")
    review_sub = review.add_subparsers(dest="review_command", required=True)
    serve_p = review_sub.add_parser("serve", help="serve the review queue over HTTP")
    serve_p.add_argument("--bind", default="127.0.0.1:8787", help="host:port to bind")
    serve_p.add_argument("--ui-dir", help="directory with the built review UI bundle")
    merge = sub.add_parser("merge", help="merge human review results into the decisions")
    merge.add_argument("--results", required=True, help="review results JSON file")
    sub.add_parser("report", help="build the with/without comparison report")
    sub.add_parser("plot", help="render SVG figures from the JSON artifacts")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, corpus_path=args.corpus,
                          run_dir=args.run_dir, seed=args.seed,
                          threshold_mode=args.threshold_mode)
        run_dir = Path(cfg.run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "sample":
            cmd_sample(cfg, run_dir)
        elif args.command == "tune":
            cmd_tune(cfg, run_dir)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, run_dir)
        elif args.command == "grade":
            cmd_grade(cfg, run_dir, args.threshold)
        elif args.command == "merge":
            cmd_merge(cfg, run_dir, args.results)
        elif args.command == "report":
            cmd_report(cfg, run_dir)
        elif args.command == "plot":
            cmd_plot(cfg, run_dir)
        elif args.command == "review":
            cmd_review_serve(cfg, run_dir, args.bind, args.ui_dir)
    except GradeGuardError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
