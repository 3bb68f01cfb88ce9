import type {
  Curve,
  Metrics,
  SubmitAck,
  TasksResponse,
  Taxonomy,
  TrainStatus,
} from "./types.js";

/** Error payload shape the service uses for every non-2xx response. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(detail);
  }

  get isConflict(): boolean {
    return this.code === "conflict";
  }

  get isBusy(): boolean {
    return this.code === "busy";
  }

  get isNoRoundsYet(): boolean {
    return this.code === "no_rounds_yet";
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "error";
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.error === "string") code = body.error;
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, code, detail);
}

export class Api {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init);
    if (!resp.ok) {
      throw await parseError(resp);
    }
    return (await resp.json()) as T;
  }

  getTaxonomy(): Promise<Taxonomy> {
    return this.request("/taxonomy");
  }

  getTasks(n: number, annotator?: string): Promise<TasksResponse> {
    const params = new URLSearchParams({ n: String(n) });
    if (annotator) params.set("annotator", annotator);
    return this.request(`/tasks?${params}`);
  }

  submitLabels(
    docId: string,
    aspects: string[],
    sentiment: string[],
    annotator: string,
  ): Promise<SubmitAck> {
    return this.request(`/tasks/${encodeURIComponent(docId)}/labels`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ aspects, sentiment, annotator }),
    });
  }

  train(): Promise<TrainStatus> {
    return this.request("/train", { method: "POST" });
  }

  trainStatus(): Promise<TrainStatus> {
    return this.request("/train/status");
  }

  metrics(): Promise<Metrics> {
    return this.request("/metrics");
  }

  curve(): Promise<Curve> {
    return this.request("/curve");
  }
}
