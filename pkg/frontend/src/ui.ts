import type { ReviewApp } from "./app";
import { LATTICE_GRADES } from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatScore(score: number | null): string {
  return score === null ? "no score (could not grade)" : score.toFixed(4);
}

export function render(app: ReviewApp, root: HTMLElement): void {
  root.textContent = "";

  const header = el("header");
  header.append(el("h1", "", "Review queue"));
  header.append(
    el("span", "progress",
       `${app.progress.pending} pending / ${app.progress.done} done`),
  );
  root.append(header);

  if (app.banner !== null) {
    const banner = el("div", `banner banner-${app.banner.kind}`, app.banner.message);
    if (app.banner.kind === "connection") {
      const retry = el("button", "retry", "Retry");
      retry.addEventListener("click", () => void app.load());
      banner.append(" ", retry);
    }
    root.append(banner);
  }

  if (app.allReviewed) {
    root.append(
      el("div", "all-reviewed",
         `All reviewed. ${app.progress.done} item(s) graded.`),
    );
    return;
  }

  const layout = el("div", "layout");
  root.append(layout);

  const list = el("ul", "queue");
  for (const item of app.queue) {
    const entry = el("li", "queue-item", "");
    entry.dataset.recordId = item.record_id;
    if (item.record_id === app.selectedId) entry.classList.add("selected");
    entry.append(el("span", "queue-id", item.record_id));
    entry.append(el("span", "queue-score", formatScore(item.indecisiveness_score)));
    entry.addEventListener("click", () => app.select(item.record_id));
    list.append(entry);
  }
  layout.append(list);

  const item = app.selected;
  if (item === null) return;

  const detail = el("section", "detail");
  const rows: Array<[string, string]> = [
    ["Question", item.question_text],
    ["Reference answer", item.reference_answer],
    ["Student answer", item.student_answer],
    ["Model mean", item.predicted_mean === null ? "n/a" : item.predicted_mean.toFixed(2)],
    ["Indecisiveness score", formatScore(item.indecisiveness_score)],
  ];
  for (const [label, value] of rows) {
    const row = el("div", "field");
    row.append(el("div", "label", label));
    row.append(el("div", "value", value));
    detail.append(row);
  }
  if (item.sample_feedbacks.length > 0) {
    const fb = el("div", "field");
    fb.append(el("div", "label", "Model feedback samples"));
    const ul = el("ul", "feedbacks");
    for (const text of item.sample_feedbacks) ul.append(el("li", "", text));
    fb.append(ul);
    detail.append(fb);
  }

  const controls = el("div", "grade-controls");
  for (const grade of LATTICE_GRADES) {
    const button = el("button", "grade", grade.toFixed(1));
    button.dataset.grade = String(grade);
    button.addEventListener("click", () => void app.submit(grade));
    controls.append(button);
  }
  detail.append(controls);
  layout.append(detail);
}
