import type { JobView } from './types.js';

export interface ProgressDisplay {
  /** 0-100, or null when total is unknown. */
  percent: number | null;
  label: string;
  spinner: boolean;
  terminal: boolean;
  badge: 'success' | 'error' | 'canceled' | null;
  errorText: string | null;
}

const TERMINAL_STATES = new Set(['succeeded', 'failed', 'canceled']);

export function isTerminal(state: string): boolean {
  return TERMINAL_STATES.has(state);
}

/** Map a job view onto display state; polling stops once terminal. */
export function renderJobProgress(job: JobView): ProgressDisplay {
  const { done, total } = job.progress;
  const percent = total > 0 ? Math.round((100 * done) / total) : null;
  switch (job.state) {
    case 'queued':
      return { percent: null, label: 'queued', spinner: true, terminal: false, badge: null, errorText: null };
    case 'running':
      return {
        percent,
        label: total > 0 ? `${done}/${total}` : 'running',
        spinner: true,
        terminal: false,
        badge: null,
        errorText: null,
      };
    case 'succeeded':
      return { percent: 100, label: 'succeeded', spinner: false, terminal: true, badge: 'success', errorText: null };
    case 'failed':
      return {
        percent,
        label: 'failed',
        spinner: false,
        terminal: true,
        badge: 'error',
        errorText: job.error ?? 'failed',
      };
    case 'canceled':
      return { percent, label: 'canceled', spinner: false, terminal: true, badge: 'canceled', errorText: null };
  }
}
