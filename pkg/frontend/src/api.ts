import type { Ack, Progress, Task } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

/** What the rater flow needs from the service. */
export interface TaskApi {
  nextTask(raterId: string): Promise<Task | null>;
  submitAnswer(taskId: string, raterId: string, verdicts: string[]): Promise<Ack>;
}

/** Thin typed client over the annotation service HTTP/JSON API. */
export class ApiClient implements TaskApi {
  constructor(private readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async checked(resp: Response): Promise<unknown> {
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, resp.status);
    }
    return resp.json();
  }

  async nextTask(raterId: string): Promise<Task | null> {
    const resp = await fetch(
      this.url(`/api/tasks/next?rater_id=${encodeURIComponent(raterId)}`),
    );
    const body = (await this.checked(resp)) as { task: Task | null };
    return body.task;
  }

  async getTask(taskId: string): Promise<Task> {
    const resp = await fetch(this.url(`/api/tasks/${taskId}`));
    const body = (await this.checked(resp)) as { task: Task };
    return body.task;
  }

  async submitAnswer(
    taskId: string,
    raterId: string,
    verdicts: string[],
  ): Promise<Ack> {
    const resp = await fetch(this.url("/api/answers"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        task_id: taskId,
        rater_id: raterId,
        verdicts,
      }),
    });
    const body = (await this.checked(resp)) as { ack: Ack };
    return body.ack;
  }

  async progress(): Promise<Progress> {
    const resp = await fetch(this.url("/api/progress"));
    return (await this.checked(resp)) as Progress;
  }

  async imageBaseUrl(): Promise<string> {
    const resp = await fetch(this.url("/api/config"));
    const body = (await this.checked(resp)) as { image_base_url: string };
    return body.image_base_url;
  }
}
