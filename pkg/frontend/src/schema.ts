/**
 * Client-side validation driven by the shared schema the server exposes
 * at GET /api/schema. Semantics mirror the server's checks exactly; the
 * server stays authoritative.
 */

export interface FieldRule {
  type: 'integer' | 'number' | 'string';
  required?: boolean;
  default?: unknown;
  min?: number;
  max?: number;
  min_exclusive?: number;
  max_exclusive?: number;
  min_length?: number;
  enum?: string[];
}

export type SchemaSection = Record<string, FieldRule>;

export interface ValidationSchema {
  generation: SchemaSection;
  finetune: SchemaSection;
}

export interface FieldError {
  field: string;
  message: string;
}

export interface ValidationResult {
  clean: Record<string, unknown>;
  errors: FieldError[];
}

function typeOk(rule: FieldRule, value: unknown): boolean {
  if (rule.type === 'integer') {
    return typeof value === 'number' && Number.isInteger(value);
  }
  if (rule.type === 'number') {
    return typeof value === 'number' && Number.isFinite(value);
  }
  return typeof value === 'string';
}

/** Validate a payload against one schema section, filling defaults. */
export function validateSection(
  section: SchemaSection,
  payload: Record<string, unknown>,
): ValidationResult {
  const errors: FieldError[] = [];
  const clean: Record<string, unknown> = { ...payload };
  for (const [field, rule] of Object.entries(section)) {
    const value = payload[field];
    if (value === undefined || value === null) {
      if (rule.required) {
        errors.push({ field, message: 'is required' });
      } else if ('default' in rule) {
        clean[field] = rule.default;
      }
      continue;
    }
    if (!typeOk(rule, value)) {
      errors.push({ field, message: `must be a ${rule.type}` });
      continue;
    }
    if (rule.enum && !rule.enum.includes(value as string)) {
      errors.push({ field, message: `must be one of ${rule.enum.join(', ')}` });
    }
    if (rule.min !== undefined && (value as number) < rule.min) {
      errors.push({ field, message: `must be >= ${rule.min}` });
    }
    if (rule.max !== undefined && (value as number) > rule.max) {
      errors.push({ field, message: `must be <= ${rule.max}` });
    }
    if (rule.min_exclusive !== undefined && (value as number) <= rule.min_exclusive) {
      errors.push({ field, message: `must be > ${rule.min_exclusive}` });
    }
    if (rule.max_exclusive !== undefined && (value as number) >= rule.max_exclusive) {
      errors.push({ field, message: `must be < ${rule.max_exclusive}` });
    }
    if (rule.min_length !== undefined && (value as string).length < rule.min_length) {
      errors.push({ field, message: 'must be non-empty' });
    }
  }
  return { clean, errors };
}
