// Explorer state and the data joins behind every rendered view. Counts,
// histograms, and scatter points are always derived from the universe rows
// of the loaded bundle, never from the bundle's own summary block, so a
// re-render cannot drift away from the data.

import { Bundle, BundleError, STATUS_OK, Universe } from "./bundle.js";

// Decision name -> selected options. A decision that is absent or mapped to
// an empty list places no constraint. Within one decision the selected
// options are alternatives; across decisions every constraint must hold.
export type Filters = Record<string, string[]>;

export interface ExplorerState {
  bundle: Bundle;
  filters: Filters;
  selectedId: string | null;
}

export function initialState(bundle: Bundle): ExplorerState {
  return { bundle, filters: {}, selectedId: null };
}

export function checkFilters(bundle: Bundle, filters: Filters): void {
  for (const [name, selected] of Object.entries(filters)) {
    const spec = bundle.decisions.find((d) => d.name === name);
    if (!spec) {
      throw new BundleError(`filter on unknown decision "${name}"`);
    }
    for (const option of selected) {
      if (!spec.options.includes(option)) {
        throw new BundleError(`"${option}" is not an option of decision "${name}"`);
      }
    }
  }
}

export function visibleUniverses(bundle: Bundle, filters: Filters): Universe[] {
  checkFilters(bundle, filters);
  return bundle.universes.filter((u) =>
    Object.entries(filters).every(
      ([name, selected]) => selected.length === 0 || selected.includes(u.options[name]),
    ),
  );
}

export const HISTOGRAM_BINS = 20;

// Fairness histogram over the visible rows. Fixed [0, 1] range with the top
// edge folded into the last bin, the same binning the pipeline reports.
export function histogramCounts(universes: Universe[], bins = HISTOGRAM_BINS): number[] {
  const counts = new Array<number>(bins).fill(0);
  for (const u of universes) {
    if (u.metrics.status !== STATUS_OK || u.metrics.eq_odds_diff === null) {
      continue;
    }
    const bin = Math.min(Math.floor(u.metrics.eq_odds_diff * bins), bins - 1);
    counts[bin] += 1;
  }
  return counts;
}

export interface MetricStats {
  visible: number;
  ok: number;
  errored: number;
  min: number | null;
  max: number | null;
  mean: number | null;
}

export function metricStats(universes: Universe[]): MetricStats {
  const values: number[] = [];
  let errored = 0;
  for (const u of universes) {
    if (u.metrics.status === STATUS_OK && u.metrics.eq_odds_diff !== null) {
      values.push(u.metrics.eq_odds_diff);
    } else {
      errored += 1;
    }
  }
  const n = values.length;
  return {
    visible: universes.length,
    ok: n,
    errored,
    min: n > 0 ? Math.min(...values) : null,
    max: n > 0 ? Math.max(...values) : null,
    mean: n > 0 ? values.reduce((s, v) => s + v, 0) / n : null,
  };
}

export type PerfMetric = "f1" | "accuracy" | "balanced_accuracy";

export const PERF_METRICS: PerfMetric[] = ["f1", "accuracy", "balanced_accuracy"];

export interface ScatterPoint {
  id: string;
  fairness: number;
  performance: number;
}

export function scatterPoints(universes: Universe[], metric: PerfMetric): ScatterPoint[] {
  const points: ScatterPoint[] = [];
  for (const u of universes) {
    if (u.metrics.status !== STATUS_OK) {
      continue;
    }
    const fairness = u.metrics.eq_odds_diff;
    const performance = u.metrics[metric];
    if (fairness === null || performance === null) {
      continue;
    }
    points.push({ id: u.id, fairness, performance });
  }
  return points;
}
