import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';

import type { ValidationSchema } from '../src/schema.js';

/** The one shared schema file the server packages and serves at
 * /api/schema; consuming it directly keeps client and server rules
 * from drifting. */
export function loadSharedSchema(): ValidationSchema {
  const path = fileURLToPath(
    new URL('../../src/mimir/data/validation_schema.json', import.meta.url),
  );
  return JSON.parse(readFileSync(path, 'utf-8')) as ValidationSchema;
}
