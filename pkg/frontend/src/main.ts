import { ApiClient } from './api.js';
import { AppController } from './controller.js';
import type { ProgressDisplay } from './progress.js';
import type { JobView } from './types.js';

/** DOM glue: four tabs (datasets / agent tuning / fine-tuning / jobs)
 * bound to one AppController. All behavior lives in the controller. */

const controller = new AppController(new ApiClient());

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function switchTab(name: string): void {
  document.querySelectorAll<HTMLElement>('.tab-panel').forEach((panel) => {
    panel.hidden = panel.dataset.tab !== name;
  });
  document.querySelectorAll<HTMLElement>('.tab-button').forEach((button) => {
    button.classList.toggle('active', button.dataset.tab === name);
  });
}

function renderDatasetList(prefix: string): void {
  const container = el<HTMLDivElement>('dataset-list');
  container.innerHTML = '';
  for (const descriptor of controller.searchDatasets(prefix)) {
    const row = document.createElement('label');
    row.className = 'dataset-row';
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.checked = controller.state.selectedDatasets.has(descriptor.id);
    box.addEventListener('change', () => controller.toggleDataset(descriptor.id));
    row.append(box, ` ${descriptor.name} (${descriptor.record_count} records)`);
    container.append(row);
  }
}

function renderErrors(): void {
  const box = el<HTMLDivElement>('form-errors');
  box.innerHTML = '';
  for (const error of controller.fieldErrors) {
    const line = document.createElement('div');
    line.className = 'field-error';
    line.textContent = `${error.field}: ${error.message}`;
    box.append(line);
  }
}

function progressRow(job: JobView, display: ProgressDisplay): HTMLElement {
  const row = document.createElement('div');
  row.className = 'job-row';
  const text = display.percent === null ? display.label : `${display.label} (${display.percent}%)`;
  row.textContent = `${job.id} ${job.kind}: ${text}`;
  if (display.errorText) {
    const badge = document.createElement('span');
    badge.className = 'badge badge-error';
    badge.textContent = display.errorText;
    row.append(' ', badge);
  }
  return row;
}

async function refreshJobsPanel(): Promise<void> {
  const jobs = await controller.refreshJobs();
  const container = el<HTMLDivElement>('job-list');
  container.innerHTML = '';
  for (const job of jobs) {
    const { renderJobProgress } = await import('./progress.js');
    container.append(progressRow(job, renderJobProgress(job)));
  }
}

function readNumber(id: string): number | null {
  const raw = el<HTMLInputElement>(id).value.trim();
  return raw === '' ? null : Number(raw);
}

function bindAgentTuningForm(): void {
  el<HTMLButtonElement>('generate-button').addEventListener('click', async () => {
    const draft = controller.state.genDraft;
    draft.mode = el<HTMLSelectElement>('gen-mode').value as 'dialogue' | 'trajectory';
    draft.rounds = readNumber('gen-rounds');
    draft.temperature = readNumber('gen-temperature');
    draft.max_tokens = readNumber('gen-max-tokens');
    draft.framework = el<HTMLSelectElement>('gen-framework').value as typeof draft.framework;
    draft.roles = el<HTMLInputElement>('gen-roles').value.split(',').map((s) => s.trim()).filter(Boolean);
    draft.tools = el<HTMLInputElement>('gen-tools').value.split(',').map((s) => s.trim()).filter(Boolean);

    const jobId = await controller.submitGeneration();
    renderErrors();
    if (!jobId) return;
    switchTab('jobs');
    await controller.monitorJob(jobId, () => void refreshJobsPanel());
    const example = controller.illustrativeExample;
    if (example) {
      el<HTMLPreElement>('illustrative-example').textContent = JSON.stringify(example, null, 2);
    }
  });
}

function bindFinetuneForm(): void {
  el<HTMLButtonElement>('finetune-button').addEventListener('click', async () => {
    const draft = controller.state.ftDraft;
    draft.base_model = el<HTMLInputElement>('ft-base-model').value;
    draft.dataset_path = el<HTMLInputElement>('ft-dataset').value;
    draft.output_dir = el<HTMLInputElement>('ft-output').value;
    draft.method = el<HTMLSelectElement>('ft-method').value as 'full' | 'lora';
    draft.lora_rank = readNumber('ft-lora-rank');
    draft.learning_rate = readNumber('ft-lr');
    draft.epochs = readNumber('ft-epochs');

    const jobId = await controller.submitFinetune();
    renderErrors();
    if (!jobId) return;
    switchTab('jobs');
    await controller.monitorJob(jobId, () => void refreshJobsPanel());
  });
}

async function start(): Promise<void> {
  await controller.init();
  renderDatasetList('');
  el<HTMLInputElement>('dataset-search').addEventListener('input', (event) => {
    renderDatasetList((event.target as HTMLInputElement).value);
  });
  el<HTMLButtonElement>('topic-upload-button').addEventListener('click', async () => {
    const kind = el<HTMLSelectElement>('topic-kind').value as 'keyword' | 'sentence';
    const lines = el<HTMLTextAreaElement>('topic-lines').value.split('\n').filter((l) => l.trim());
    const added = await controller.uploadTopics(kind, lines);
    el<HTMLSpanElement>('topic-status').textContent = `added ${added} topics`;
  });
  document.querySelectorAll<HTMLElement>('.tab-button').forEach((button) => {
    button.addEventListener('click', () => switchTab(button.dataset.tab ?? 'datasets'));
  });
  bindAgentTuningForm();
  bindFinetuneForm();
  setInterval(() => void refreshJobsPanel(), 1000);
  switchTab('datasets');
}

void start();
