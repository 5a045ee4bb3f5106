import type { FieldError, ValidationSchema } from './schema.js';
import { validateSection } from './schema.js';
import type { FineTuneDraft, ViewState } from './types.js';

export interface JobSubmission {
  kind: string;
  config: Record<string, unknown>;
}

export interface BuildResult {
  body: JobSubmission | null;
  errors: FieldError[];
}

function withoutNulls(record: Record<string, unknown>): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const [key, value] of Object.entries(record)) {
    if (value !== null && value !== undefined) out[key] = value;
  }
  return out;
}

/**
 * Turn the S2 form state into the exact job-submission body the server
 * expects, validating with the shared schema first. Returns field-level
 * errors and no body when the draft is invalid.
 */
export function buildGenerationRequest(state: ViewState, schema: ValidationSchema): BuildResult {
  const draft = state.genDraft;
  const candidate = withoutNulls({
    rounds: draft.rounds,
    temperature: draft.temperature,
    max_tokens: draft.max_tokens,
    framework: draft.framework,
    rng_seed: draft.rng_seed,
    max_steps: draft.max_steps,
  });
  const { clean, errors } = validateSection(schema.generation, candidate);
  if (errors.length > 0) {
    return { body: null, errors };
  }
  const config: Record<string, unknown> = {
    ...clean,
    roles: [...draft.roles],
    tools: [...draft.tools],
    datasets: [...state.selectedDatasets].sort(),
  };
  if (draft.framework === 'cot' && draft.cotTemplate) {
    config.cot_template = draft.cotTemplate;
  }
  const kind = draft.mode === 'dialogue' ? 'generate_dialogue' : 'generate_trajectory';
  return { body: { kind, config }, errors: [] };
}

/** Same idea for the S3 fine-tuning form; body goes to POST /api/finetune. */
export function buildFinetuneRequest(
  draft: FineTuneDraft,
  schema: ValidationSchema,
): { body: Record<string, unknown> | null; errors: FieldError[] } {
  const candidate = withoutNulls({ ...draft });
  const { clean, errors } = validateSection(schema.finetune, candidate);
  if (errors.length > 0) {
    return { body: null, errors };
  }
  return { body: clean, errors: [] };
}
