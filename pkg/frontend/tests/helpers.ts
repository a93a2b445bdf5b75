import type { Progress, ReviewItem } from "../src/types";

export function item(overrides: Partial<ReviewItem> & { record_id: string }): ReviewItem {
  return {
    question_text: "What is a loop?",
    reference_answer: "A loop repeats a block while a condition holds.",
    student_answer: "It repeats code.",
    predicted_mean: 2.8,
    indecisiveness_score: 0.12,
    sample_feedbacks: ["close but incomplete"],
    status: "pending",
    human_grade: null,
    ...overrides,
  };
}

export interface FakeServer {
  items: ReviewItem[];
  done: number;
  fetch: typeof fetch;
}

/** In-memory stand-in for the review service: queue, progress, review POST. */
export function fakeServer(initial: ReviewItem[]): FakeServer {
  const server: FakeServer = {
    items: initial.map((i) => ({ ...i })),
    done: 0,
    fetch: (async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
      const url = String(input);
      if (url.endsWith("/api/queue")) {
        return Response.json(server.items.filter((i) => i.status === "pending"));
      }
      if (url.endsWith("/api/progress")) {
        const pending = server.items.filter((i) => i.status === "pending").length;
        return Response.json({ pending, done: server.done } satisfies Progress);
      }
      if (url.endsWith("/api/review") && init?.method === "POST") {
        const body = JSON.parse(String(init.body)) as { record_id: string; grade: number };
        if (!Number.isInteger(body.grade * 2) || body.grade < 0 || body.grade > 5) {
          return Response.json(
            { detail: `grade ${body.grade} is not a 0.5 multiple in [0, 5]` },
            { status: 422 },
          );
        }
        const found = server.items.find((i) => i.record_id === body.record_id);
        if (found === undefined) {
          return Response.json(
            { detail: `unknown record '${body.record_id}'` },
            { status: 404 },
          );
        }
        found.status = "done";
        found.human_grade = body.grade;
        server.done += 1;
        return Response.json({ record_id: body.record_id, status: "done", grade: body.grade });
      }
      return Response.json({ detail: "no route" }, { status: 500 });
    }) as typeof fetch,
  };
  return server;
}
