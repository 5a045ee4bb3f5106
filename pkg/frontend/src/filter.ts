import type { DatasetDescriptor } from './types.js';

/**
 * Case-insensitive name-prefix filter with the same semantics as the
 * server's dataset search: match on a lowercased prefix, sort by
 * (lowercased name, raw name). An empty prefix keeps everything.
 */
export function filterDatasets(
  descriptors: DatasetDescriptor[],
  prefix: string,
): DatasetDescriptor[] {
  const folded = prefix.toLowerCase();
  return descriptors
    .filter((d) => d.name.toLowerCase().startsWith(folded))
    .slice()
    .sort((a, b) => {
      const fa = a.name.toLowerCase();
      const fb = b.name.toLowerCase();
      if (fa !== fb) return fa < fb ? -1 : 1;
      if (a.name !== b.name) return a.name < b.name ? -1 : 1;
      return 0;
    });
}
