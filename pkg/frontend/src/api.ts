/** Typed client for the scoring service. All numbers shown in the console
 *  come from these responses; the client never does scoring math itself. */

export interface HealthResponse {
  status: string;
  backend: string;
}

export interface CohortSummary {
  cohort_id: string;
  n_pos: number;
  n_neg: number;
  level: string;
}

export interface CohortMember {
  candidate_id: string;
  class: string;
  x: number[];
}

export interface CohortDocument {
  schema: number;
  level: string;
  field_tag: string;
  research_type: string;
  members: CohortMember[];
}

export interface SyntheticSpec {
  n_pos: number;
  n_neg: number;
  rng_seed?: number;
  pos_loc?: number;
  neg_loc?: number;
  dispersion?: number;
  level?: string;
}

export interface TrainRequest {
  cohort_id: string;
  kind: "m1" | "m2" | "contrastive" | "triplet";
  config?: Record<string, number>;
  ranking?: number[];
  bounds?: { r_min?: number | number[]; r_max?: number | number[] };
}

export interface ModelArtifact {
  schema: number;
  kind: string;
  model: Record<string, unknown>;
  training: Record<string, unknown>;
}

export interface TrainResponse {
  model_id: string;
  run_id: string;
  status: "done" | "running" | "failed";
  cached: boolean;
  artifact?: ModelArtifact;
}

export interface RunRecord {
  run_id: string;
  model_id: string;
  status?: string;
  trace: unknown[];
  [key: string]: unknown;
}

export interface ReportEntry {
  rank: number;
  candidate_id: string;
  aqi: number;
  passed_filter: boolean | null;
  reasons: string[];
}

export interface AQIReport {
  version: number;
  entries: ReportEntry[];
}

export interface FilterResult {
  candidate_id: string;
  passed: boolean;
  reasons: string[];
}

/** Raw candidate inputs; unset counts default server-side to zero. */
export type RecordRow = { candidate_id: string } & Record<
  string,
  string | number | null
>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly fieldPath: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly base: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? fetch.bind(globalThis);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    const payload = text ? JSON.parse(text) : {};
    if (!res.ok) {
      const err = payload?.error ?? {};
      throw new ApiError(
        res.status,
        err.code ?? "unknown_error",
        err.message ?? `request failed with status ${res.status}`,
        err.field_path ?? "",
      );
    }
    return payload as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("GET", "/health");
  }

  createCohortFromSpec(spec: SyntheticSpec): Promise<CohortSummary> {
    return this.request("POST", "/cohorts", { spec });
  }

  createCohortFromRecords(
    records: Array<RecordRow & { class: string }>,
    opts: { level?: string; caps?: Record<string, number> } = {},
  ): Promise<CohortSummary> {
    return this.request("POST", "/cohorts", { records, ...opts });
  }

  listCohorts(): Promise<{ cohorts: string[] }> {
    return this.request("GET", "/cohorts");
  }

  getCohort(
    cohortId: string,
  ): Promise<{ cohort_id: string; document: CohortDocument }> {
    return this.request("GET", `/cohorts/${encodeURIComponent(cohortId)}`);
  }

  train(req: TrainRequest): Promise<TrainResponse> {
    return this.request("POST", "/train", req);
  }

  getRun(runId: string): Promise<RunRecord> {
    return this.request("GET", `/runs/${encodeURIComponent(runId)}`);
  }

  listModels(): Promise<{ models: string[] }> {
    return this.request("GET", "/models");
  }

  getModel(modelId: string): Promise<{
    model_id: string;
    artifact: ModelArtifact;
    meta: Record<string, unknown>;
  }> {
    return this.request("GET", `/models/${encodeURIComponent(modelId)}`);
  }

  scoreRecords(
    modelId: string,
    records: RecordRow[],
    level?: string,
  ): Promise<{ model_id: string; report: AQIReport }> {
    const body: Record<string, unknown> = { records };
    if (level) body.level = level;
    return this.request(
      "POST",
      `/models/${encodeURIComponent(modelId)}/score`,
      body,
    );
  }

  scoreFeatures(
    modelId: string,
    features: Array<{ candidate_id: string; x: number[] }>,
  ): Promise<{ model_id: string; report: AQIReport }> {
    return this.request(
      "POST",
      `/models/${encodeURIComponent(modelId)}/score`,
      { features },
    );
  }

  filter(
    level: string,
    records: RecordRow[],
    overrides: Record<string, number> = {},
  ): Promise<{ level: string; results: FilterResult[] }> {
    return this.request("POST", "/filter", { level, records, ...overrides });
  }

  aggregateRankings(rankings: number[][]): Promise<{ ranks: number[] }> {
    return this.request("POST", "/rankings/aggregate", { rankings });
  }

  /** Wait for a background run to leave the running state. */
  async waitForRun(
    runId: string,
    timeoutMs = 60_000,
    pollMs = 250,
  ): Promise<RunRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const run = await this.getRun(runId);
      if (run.status !== "running") return run;
      if (Date.now() > deadline) {
        throw new Error(`run ${runId} still running after ${timeoutMs}ms`);
      }
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }
}

/** Deduplicate concurrent calls per key: while a request for `key` is in
 *  flight, further calls receive the same promise instead of a new fetch. */
export class InflightDedup {
  private readonly pending = new Map<string, Promise<unknown>>();

  run<T>(key: string, fn: () => Promise<T>): Promise<T> {
    const existing = this.pending.get(key);
    if (existing) return existing as Promise<T>;
    const p = fn().finally(() => this.pending.delete(key));
    this.pending.set(key, p);
    return p;
  }

  get size(): number {
    return this.pending.size;
  }
}
