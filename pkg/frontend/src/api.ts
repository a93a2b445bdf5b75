import type { Progress, ReviewItem, SubmitResult } from "./types";

async function reasonOf(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return `HTTP ${response.status}`;
  }
}

export class ReviewApi {
  constructor(private readonly base: string = "") {}

  async fetchQueue(): Promise<ReviewItem[]> {
    const response = await fetch(`${this.base}/api/queue`);
    if (!response.ok) throw new Error(await reasonOf(response));
    return response.json();
  }

  async fetchProgress(): Promise<Progress> {
    const response = await fetch(`${this.base}/api/progress`);
    if (!response.ok) throw new Error(await reasonOf(response));
    return response.json();
  }

  async submitGrade(recordId: string, grade: number): Promise<SubmitResult> {
    let response: Response;
    try {
      response = await fetch(`${this.base}/api/review`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ record_id: recordId, grade }),
      });
    } catch (error) {
      return { kind: "offline", reason: String(error) };
    }
    if (response.ok) return { kind: "ok" };
    const reason = await reasonOf(response);
    switch (response.status) {
      case 422:
        return { kind: "invalid-grade", reason };
      case 404:
        return { kind: "unknown-record", reason };
      case 409:
        return { kind: "not-routed", reason };
      default:
        return { kind: "offline", reason };
    }
  }
}
