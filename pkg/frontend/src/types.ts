/** Shapes exchanged with the HTTP API, mirrored from the job service. */

export interface DatasetDescriptor {
  id: string;
  name: string;
  domain: string;
  format: 'instruction' | 'raw';
  record_count: number;
  license_note: string;
}

export interface TopicSummary {
  id: string;
  kind: 'keyword' | 'sentence';
  text: string;
  source: string;
}

export interface RoleSummary {
  name: string;
  role_prompt: string;
}

export type JobState = 'queued' | 'running' | 'succeeded' | 'failed' | 'canceled';

export interface JobView {
  id: string;
  kind: string;
  state: JobState;
  progress: { done: number; total: number };
  config: Record<string, unknown>;
  artifacts: string[];
  error: string | null;
  created_at: number;
}

export interface SamplesPage {
  items: Record<string, unknown>[];
  total: number;
  offset: number;
  limit: number;
}

export type GenerationMode = 'dialogue' | 'trajectory';

/** Form draft for the agent-tuning view; null means "field cleared". */
export interface GenerationDraft {
  mode: GenerationMode;
  rounds: number | null;
  temperature: number | null;
  max_tokens: number | null;
  framework: 'react' | 'cot' | 'reflexion';
  rng_seed: number | null;
  max_steps: number | null;
  roles: string[];
  tools: string[];
  cotTemplate: string | null;
}

export interface FineTuneDraft {
  base_model: string;
  dataset_path: string;
  output_dir: string;
  method: 'full' | 'lora';
  lora_rank: number | null;
  lora_alpha: number | null;
  lora_dropout: number | null;
  learning_rate: number | null;
  epochs: number | null;
  batch_size: number | null;
}

export interface ViewState {
  datasets: DatasetDescriptor[];
  selectedDatasets: Set<string>;
  uploadedTopics: TopicSummary[];
  genDraft: GenerationDraft;
  ftDraft: FineTuneDraft;
  activeJobs: JobView[];
}

export function defaultGenerationDraft(): GenerationDraft {
  return {
    mode: 'dialogue',
    rounds: 3,
    temperature: null, // null = use the server default from the shared schema
    max_tokens: null,
    framework: 'react',
    rng_seed: null,
    max_steps: null,
    roles: [],
    tools: [],
    cotTemplate: null,
  };
}

export function defaultFineTuneDraft(): FineTuneDraft {
  return {
    base_model: 'llama-7b',
    dataset_path: '',
    output_dir: '',
    method: 'lora',
    lora_rank: null,
    lora_alpha: null,
    lora_dropout: null,
    learning_rate: null,
    epochs: null,
    batch_size: null,
  };
}

export function emptyViewState(): ViewState {
  return {
    datasets: [],
    selectedDatasets: new Set(),
    uploadedTopics: [],
    genDraft: defaultGenerationDraft(),
    ftDraft: defaultFineTuneDraft(),
    activeJobs: [],
  };
}
