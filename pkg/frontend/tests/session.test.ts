import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { AppController } from '../src/controller.js';
import type { JobView } from '../src/types.js';
import { loadSharedSchema } from './helpers.js';

/** Every endpoint the server documents; the UI may issue nothing else. */
const DOCUMENTED = [
  /^GET \/api\/datasets(\?q=.*)?$/,
  /^POST \/api\/topics$/,
  /^GET \/api\/roles\?domain=.+$/,
  /^GET \/api\/schema$/,
  /^POST \/api\/jobs$/,
  /^GET \/api\/jobs$/,
  /^GET \/api\/jobs\/[\w-]+$/,
  /^POST \/api\/jobs\/[\w-]+\/cancel$/,
  /^GET \/api\/jobs\/[\w-]+\/samples\?offset=\d+&limit=\d+$/,
  /^POST \/api\/verify$/,
  /^POST \/api\/finetune$/,
];

interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

/** In-memory stub of the job service with a scripted job lifecycle. */
class StubServer {
  calls: RecordedCall[] = [];
  submittedConfigs: Record<string, unknown>[] = [];
  private jobs = new Map<string, JobView>();
  private pollPlans = new Map<string, JobView[]>();
  private nextId = 1;

  private datasets = [
    { id: 'medqa', name: 'MedQA', domain: 'medical', format: 'instruction', record_count: 3, license_note: '' },
    { id: 'medmcqa', name: 'MedMCQA', domain: 'medical', format: 'instruction', record_count: 2, license_note: '' },
    { id: 'pubmedqa', name: 'PubMedQA', domain: 'medical', format: 'instruction', record_count: 1, license_note: '' },
  ];

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    this.calls.push({ method, path: input, body });
    return new Response(JSON.stringify(this.route(method, input, body)), {
      status: 200,
      headers: { 'Content-Type': 'application/json' },
    });
  };

  private route(method: string, path: string, body: any): unknown {
    if (method === 'GET' && path.startsWith('/api/datasets')) return this.datasets;
    if (method === 'GET' && path === '/api/schema') return loadSharedSchema();
    if (method === 'POST' && path === '/api/topics') return { added: body.lines.length };
    if (method === 'GET' && path.startsWith('/api/roles')) {
      return [{ name: 'Doctor', role_prompt: 'You are a physician.' }];
    }
    if (method === 'POST' && (path === '/api/jobs' || path === '/api/finetune')) {
      const id = `job${this.nextId++}`;
      const kind = path === '/api/finetune' ? 'finetune' : body.kind;
      const config = path === '/api/finetune' ? body : body.config;
      this.submittedConfigs.push(config);
      const base: JobView = {
        id, kind, state: 'queued', progress: { done: 0, total: 0 },
        config, artifacts: [], error: null, created_at: 0,
      };
      this.jobs.set(id, base);
      this.pollPlans.set(id, [
        { ...base, state: 'queued' },
        { ...base, state: 'running', progress: { done: 1, total: 2 } },
        { ...base, state: 'running', progress: { done: 2, total: 2 } },
        { ...base, state: 'succeeded', progress: { done: 2, total: 2 },
          artifacts: [`/data/jobs/${id}/out/dialogues.jsonl`] },
      ]);
      return { id };
    }
    if (method === 'GET' && path === '/api/jobs') return [...this.jobs.values()];
    if (method === 'GET' && /^\/api\/jobs\/[\w-]+\/samples\?/.test(path)) {
      return {
        items: [{ id: 'sample1', seed: 'Anatomy', roles: ['Doctor'],
                  turns: [{ speaker: 'human', text: 'q' }, { speaker: 'assistant', text: 'a' }],
                  meta: { model: 'stub', temperature: 0.1, max_tokens: 1000, rng_seed: 0 } }],
        total: 2, offset: 0, limit: 1,
      };
    }
    const cancel = path.match(/^\/api\/jobs\/([\w-]+)\/cancel$/);
    if (method === 'POST' && cancel) {
      const job = this.jobs.get(cancel[1])!;
      const canceled = { ...job, state: 'canceled' as const };
      this.jobs.set(job.id, canceled);
      this.pollPlans.set(job.id, [canceled]);
      return canceled;
    }
    const single = path.match(/^\/api\/jobs\/([\w-]+)$/);
    if (method === 'GET' && single) {
      const plan = this.pollPlans.get(single[1])!;
      const view = plan.length > 1 ? plan.shift()! : plan[0];
      this.jobs.set(view.id, view);
      return view;
    }
    if (method === 'POST' && path === '/api/verify') {
      const id = `job${this.nextId++}`;
      const view: JobView = {
        id, kind: 'verify', state: 'succeeded', progress: { done: 1, total: 1 },
        config: body, artifacts: [], error: null, created_at: 0,
      };
      this.jobs.set(id, view);
      this.pollPlans.set(id, [view]);
      return { id };
    }
    throw new Error(`stub has no route for ${method} ${path}`);
  }
}

function makeSession() {
  const server = new StubServer();
  const api = new ApiClient('', server.fetch);
  const controller = new AppController(api, 1, async () => {});
  return { server, controller };
}

describe('recorded operator session', () => {
  it('replays S1 -> S2 -> submit -> monitor issuing only documented endpoints', async () => {
    const { server, controller } = makeSession();

    // S1: load, search by initials, pick datasets, upload topics
    await controller.init();
    const filtered = controller.searchDatasets('med');
    expect(filtered.map((d) => d.name)).toEqual(['MedMCQA', 'MedQA']);
    controller.toggleDataset('medqa');
    expect(await controller.uploadTopics('keyword', ['Anatomy', 'Cardiology'])).toBe(2);

    // S2: defaults untouched, submit
    const jobId = await controller.submitGeneration();
    expect(jobId).toBe('job1');
    expect(server.submittedConfigs[0].temperature).toBe(0.1);
    expect(server.submittedConfigs[0].max_tokens).toBe(1000);
    expect(server.submittedConfigs[0].datasets).toEqual(['medqa']);

    // monitor: poll to terminal, then the illustrative example appears
    const states: string[] = [];
    const job = await controller.monitorJob(jobId!, (_display, view) => states.push(view.state));
    expect(job.state).toBe('succeeded');
    expect(states).toEqual(['queued', 'running', 'running', 'succeeded']);
    expect(controller.illustrativeExample).not.toBeNull();
    expect(controller.illustrativeExample!.id).toBe('sample1');

    for (const call of server.calls) {
      const signature = `${call.method} ${call.path}`;
      expect(
        DOCUMENTED.some((pattern) => pattern.test(signature)),
        `undocumented request: ${signature}`,
      ).toBe(true);
    }
  });

  it('invalid draft sends nothing', async () => {
    const { server, controller } = makeSession();
    await controller.init();
    const before = server.calls.length;
    controller.state.genDraft.rounds = null;
    const jobId = await controller.submitGeneration();
    expect(jobId).toBeNull();
    expect(controller.fieldErrors[0].field).toBe('rounds');
    expect(server.calls.length).toBe(before);
  });

  it('cancel flow stays inside the documented surface', async () => {
    const { server, controller } = makeSession();
    await controller.init();
    const jobId = await controller.submitGeneration();
    const view = await controller.cancelJob(jobId!);
    expect(view.state).toBe('canceled');
    const monitored = await controller.monitorJob(jobId!);
    expect(monitored.state).toBe('canceled');
    for (const call of server.calls) {
      const signature = `${call.method} ${call.path}`;
      expect(DOCUMENTED.some((pattern) => pattern.test(signature))).toBe(true);
    }
  });

  it('fine-tuning submission uses POST /api/finetune', async () => {
    const { server, controller } = makeSession();
    await controller.init();
    controller.state.ftDraft.dataset_path = 'dialogues.jsonl';
    controller.state.ftDraft.output_dir = 'out';
    const jobId = await controller.submitFinetune();
    expect(jobId).not.toBeNull();
    const submission = server.calls.find((c) => c.path === '/api/finetune');
    expect(submission).toBeDefined();
    expect((submission!.body as any).lora_rank).toBe(8);
  });
});
