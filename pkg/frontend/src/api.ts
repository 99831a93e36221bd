// Typed client for the dead-annotation job service. The fetch implementation
// is injected so tests can replay recorded responses; at most one request is
// in flight at a time (requests queue behind each other).

export type Mode = "idle" | "running" | "success" | "failure" | "cancel";

export interface RemovableEntry {
  id: string;
  kind: string;
  start: number; // byte offset into the UTF-8 encoded source
  end: number;
  method: string;
}

export interface MethodInfo {
  name: string;
  excluded: boolean;
  dirty: boolean;
}

export interface ParseErrorInfo {
  message: string;
  line: number;
  col: number;
}

export interface JobSnapshot {
  id: string;
  mode: Mode;
  monotone: boolean;
  excluded: string[];
  removable: RemovableEntry[];
  source_rev: number;
  source: string;
  dirty: string[];
  methods: MethodInfo[];
  file_name: string;
  parse_error: ParseErrorInfo | null;
  last_error: string | null;
}

export interface ApplyResult {
  source: string;
  source_rev: number;
}

export interface PatchResult {
  source_rev: number;
  dirty: string[];
  mode: Mode;
}

export type ApplySelect = "all" | { id: string } | { method: string };

export type OracleSpec = { deps: string } | { external: Record<string, unknown> };

export interface CreateJobRequest {
  source: string;
  oracle: OracleSpec;
  file_name?: string;
  idle_threshold_ms?: number;
  allow_stale_apply?: boolean;
}

export interface CreatedJob {
  id: string;
  mode: Mode;
  source_rev: number;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly location?: unknown,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

interface FetchResponse {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<FetchResponse>;

export class ServiceClient {
  private queue: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  createJob(request: CreateJobRequest): Promise<CreatedJob> {
    return this.send<CreatedJob>("POST", "/jobs", request);
  }

  getJob(jobId: string): Promise<JobSnapshot> {
    return this.send<JobSnapshot>("GET", `/jobs/${jobId}`);
  }

  analyze(jobId: string, scope: "all" | { methods: string[] } = "all"): Promise<{ mode: Mode }> {
    return this.send<{ mode: Mode }>("POST", `/jobs/${jobId}/analyze`, { scope });
  }

  cancel(jobId: string): Promise<{ mode: Mode }> {
    return this.send<{ mode: Mode }>("POST", `/jobs/${jobId}/cancel`);
  }

  apply(jobId: string, select: ApplySelect, expectRev?: number): Promise<ApplyResult> {
    const body: Record<string, unknown> = { select };
    if (expectRev !== undefined) body["expect_rev"] = expectRev;
    return this.send<ApplyResult>("POST", `/jobs/${jobId}/apply`, body);
  }

  patchSource(jobId: string, source: string, expectRev?: number): Promise<PatchResult> {
    const body: Record<string, unknown> = { source };
    if (expectRev !== undefined) body["expect_rev"] = expectRev;
    return this.send<PatchResult>("PATCH", `/jobs/${jobId}/source`, body);
  }

  idle(jobId: string, idleMs: number): Promise<{ started: boolean }> {
    return this.send<{ started: boolean }>("POST", `/jobs/${jobId}/idle`, { idle_ms: idleMs });
  }

  wait(jobId: string, timeoutMs = 30000): Promise<{ mode: Mode }> {
    return this.send<{ mode: Mode }>("GET", `/jobs/${jobId}/wait?timeout_ms=${timeoutMs}`);
  }

  // Serialize requests: the next one starts only after the previous settles.
  private send<T>(method: string, path: string, body?: unknown): Promise<T> {
    const run = () => this.request<T>(method, path, body);
    const next = this.queue.then(run, run);
    this.queue = next.catch(() => undefined);
    return next;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: { method: string; headers?: Record<string, string>; body?: string } = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload = (await response.json()) as Record<string, unknown>;
    if (response.status >= 400) {
      throw new ServiceError(
        response.status,
        String(payload["code"] ?? "error"),
        String(payload["message"] ?? "request failed"),
        payload["location"],
      );
    }
    return payload as T;
  }
}
