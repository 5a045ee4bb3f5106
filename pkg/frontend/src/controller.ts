import type { ApiClient } from './api.js';
import { filterDatasets } from './filter.js';
import { isTerminal, renderJobProgress } from './progress.js';
import type { ProgressDisplay } from './progress.js';
import { buildFinetuneRequest, buildGenerationRequest } from './request.js';
import type { FieldError, ValidationSchema } from './schema.js';
import type { DatasetDescriptor, JobView, ViewState } from './types.js';
import { emptyViewState } from './types.js';

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Drives one operator session against the API: dataset selection (S1),
 * agent-tuning configuration and submission (S2), fine-tuning (S3), and
 * job monitoring. DOM-free so the whole flow is testable; main.ts only
 * binds it to elements.
 */
export class AppController {
  state: ViewState = emptyViewState();
  schema: ValidationSchema | null = null;
  fieldErrors: FieldError[] = [];
  /** One generated sample shown in S2 after a dialogue job finishes. */
  illustrativeExample: Record<string, unknown> | null = null;

  constructor(
    private api: ApiClient,
    private pollIntervalMs = 1000,
    private sleeper: (ms: number) => Promise<void> = sleep,
  ) {}

  async init(): Promise<void> {
    this.schema = await this.api.getSchema();
    this.state.datasets = await this.api.listDatasets();
  }

  /** S1: client-side prefix filter, same semantics as server search. */
  searchDatasets(prefix: string): DatasetDescriptor[] {
    return filterDatasets(this.state.datasets, prefix);
  }

  toggleDataset(id: string): void {
    if (this.state.selectedDatasets.has(id)) {
      this.state.selectedDatasets.delete(id);
    } else {
      this.state.selectedDatasets.add(id);
    }
  }

  async uploadTopics(kind: 'keyword' | 'sentence', lines: string[]): Promise<number> {
    const { added } = await this.api.uploadTopics(kind, lines);
    return added;
  }

  /** S2: validate the draft and submit; returns the job id or null. */
  async submitGeneration(): Promise<string | null> {
    if (!this.schema) throw new Error('controller not initialized');
    const { body, errors } = buildGenerationRequest(this.state, this.schema);
    this.fieldErrors = errors;
    if (!body) return null;
    const { id } = await this.api.submitJob(body.kind, body.config);
    return id;
  }

  /** S3: validate and submit a fine-tuning run; returns the job id or null. */
  async submitFinetune(): Promise<string | null> {
    if (!this.schema) throw new Error('controller not initialized');
    const { body, errors } = buildFinetuneRequest(this.state.ftDraft, this.schema);
    this.fieldErrors = errors;
    if (!body) return null;
    const { id } = await this.api.submitFinetune(body);
    return id;
  }

  async cancelJob(id: string): Promise<JobView> {
    return this.api.cancelJob(id);
  }

  /**
   * Poll a job until terminal, reporting each display state. After a
   * successful dialogue generation one sample is fetched as the S2
   * illustrative example.
   */
  async monitorJob(
    id: string,
    onUpdate?: (display: ProgressDisplay, job: JobView) => void,
  ): Promise<JobView> {
    for (;;) {
      const job = await this.api.getJob(id);
      const display = renderJobProgress(job);
      onUpdate?.(display, job);
      if (display.terminal) {
        if (job.state === 'succeeded' && job.kind === 'generate_dialogue') {
          const page = await this.api.getSamples(id, 0, 1);
          this.illustrativeExample = page.items[0] ?? null;
        }
        return job;
      }
      await this.sleeper(this.pollIntervalMs);
    }
  }

  async refreshJobs(): Promise<JobView[]> {
    this.state.activeJobs = await this.api.listJobs();
    return this.state.activeJobs;
  }
}

export { isTerminal };
