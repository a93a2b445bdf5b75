import { ReviewApi } from "./api";
import type { Progress, ReviewItem, SubmitResult } from "./types";

// Most uncertain first: a missing score means the model produced nothing
// parseable, which outranks any finite score; ties break on record id so
// the order is stable across refreshes.
export function sortQueue(items: ReviewItem[]): ReviewItem[] {
  return [...items].sort((a, b) => {
    const sa = a.indecisiveness_score ?? Number.POSITIVE_INFINITY;
    const sb = b.indecisiveness_score ?? Number.POSITIVE_INFINITY;
    if (sa !== sb) return sb - sa;
    return a.record_id < b.record_id ? -1 : a.record_id > b.record_id ? 1 : 0;
  });
}

export interface Banner {
  kind: "connection" | "rejected" | "stale";
  message: string;
}

export class ReviewApp {
  queue: ReviewItem[] = [];
  progress: Progress = { pending: 0, done: 0 };
  selectedId: string | null = null;
  banner: Banner | null = null;
  loaded = false;

  constructor(
    private readonly api: ReviewApi,
    private readonly onChange: () => void = () => {},
  ) {}

  get selected(): ReviewItem | null {
    return this.queue.find((item) => item.record_id === this.selectedId) ?? null;
  }

  get allReviewed(): boolean {
    return this.loaded && this.queue.length === 0;
  }

  async load(): Promise<void> {
    try {
      const [queue, progress] = await Promise.all([
        this.api.fetchQueue(),
        this.api.fetchProgress(),
      ]);
      this.queue = sortQueue(queue);
      this.progress = progress;
      this.loaded = true;
      this.banner = null;
      if (this.selectedId === null || this.selected === null) {
        this.selectedId = this.queue[0]?.record_id ?? null;
      }
    } catch (error) {
      this.banner = {
        kind: "connection",
        message: `Cannot reach the review service (${String(error)}). Retry?`,
      };
    }
    this.onChange();
  }

  select(recordId: string): void {
    if (this.queue.some((item) => item.record_id === recordId)) {
      this.selectedId = recordId;
      this.banner = null;
      this.onChange();
    }
  }

  // Grades arrive from the lattice control only; the UI never fabricates one.
  async submit(grade: number): Promise<SubmitResult | null> {
    const current = this.selected;
    if (current === null) return null;
    const result = await this.api.submitGrade(current.record_id, grade);

    if (result.kind === "ok") {
      // Optimistic removal and advance, then reconcile with the server.
      const index = this.queue.findIndex((i) => i.record_id === current.record_id);
      this.queue = this.queue.filter((i) => i.record_id !== current.record_id);
      this.selectedId =
        this.queue[Math.min(index, this.queue.length - 1)]?.record_id ?? null;
      this.banner = null;
      this.onChange();
      await this.reconcile();
      return result;
    }

    if (result.kind === "not-routed") {
      this.banner = { kind: "stale", message: `Item is stale: ${result.reason}` };
      this.onChange();
      await this.reconcile();
      return result;
    }

    if (result.kind === "offline") {
      this.banner = {
        kind: "connection",
        message: `Submission failed, nothing was saved (${result.reason}). Retry?`,
      };
    } else {
      // 422 / 404: show the server's reason, keep the current item in view.
      this.banner = { kind: "rejected", message: result.reason };
    }
    this.onChange();
    return result;
  }

  private async reconcile(): Promise<void> {
    try {
      const [queue, progress] = await Promise.all([
        this.api.fetchQueue(),
        this.api.fetchProgress(),
      ]);
      this.queue = sortQueue(queue);
      this.progress = progress;
      if (this.selectedId === null || this.selected === null) {
        this.selectedId = this.queue[0]?.record_id ?? null;
      }
    } catch (error) {
      this.banner = {
        kind: "connection",
        message: `Out of sync with the review service (${String(error)}). Retry?`,
      };
    }
    this.onChange();
  }
}
