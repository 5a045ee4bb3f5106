import type { ValidationSchema } from './schema.js';
import type {
  DatasetDescriptor,
  JobView,
  RoleSummary,
  SamplesPage,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`API error ${status}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Typed client over the job service. Every method maps 1:1 onto a
 * documented endpoint; nothing else is ever requested.
 */
export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { 'Content-Type': 'application/json' } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const response = await this.fetchFn(this.baseUrl + path, init);
    const payload = await response.json().catch(() => null);
    if (!response.ok) throw new ApiError(response.status, payload);
    return payload as T;
  }

  listDatasets(q = ''): Promise<DatasetDescriptor[]> {
    const suffix = q ? `?q=${encodeURIComponent(q)}` : '';
    return this.request('GET', `/api/datasets${suffix}`);
  }

  uploadTopics(kind: 'keyword' | 'sentence', lines: string[]): Promise<{ added: number }> {
    return this.request('POST', '/api/topics', { kind, lines });
  }

  listRoles(domain: string): Promise<RoleSummary[]> {
    return this.request('GET', `/api/roles?domain=${encodeURIComponent(domain)}`);
  }

  getSchema(): Promise<ValidationSchema> {
    return this.request('GET', '/api/schema');
  }

  submitJob(kind: string, config: Record<string, unknown>): Promise<{ id: string }> {
    return this.request('POST', '/api/jobs', { kind, config });
  }

  listJobs(): Promise<JobView[]> {
    return this.request('GET', '/api/jobs');
  }

  getJob(id: string): Promise<JobView> {
    return this.request('GET', `/api/jobs/${id}`);
  }

  cancelJob(id: string): Promise<JobView> {
    return this.request('POST', `/api/jobs/${id}/cancel`);
  }

  getSamples(id: string, offset = 0, limit = 1): Promise<SamplesPage> {
    return this.request('GET', `/api/jobs/${id}/samples?offset=${offset}&limit=${limit}`);
  }

  submitVerify(jobId: string, turns: 'all' | number[]): Promise<{ id: string }> {
    return this.request('POST', '/api/verify', { job_id: jobId, turns });
  }

  submitFinetune(config: Record<string, unknown>): Promise<{ id: string }> {
    return this.request('POST', '/api/finetune', config);
  }
}
