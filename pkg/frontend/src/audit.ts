// The per-model audit view: every evaluation strategy applied to one fixed
// model, so an analyst can see how far the fairness reading moves when only
// the evaluation changes.

import { Bundle, BundleError, DecisionSpec, STATUS_OK, Universe } from "./bundle.js";

export interface AuditRow {
  strategy: Record<string, string>;
  value: number | null;
  status: string;
  isReference: boolean;
}

export interface OptionBreakdown {
  option: string;
  count: number;
  mean: number | null;
}

export interface DecisionBreakdown {
  decision: string;
  options: OptionBreakdown[];
}

export interface AuditPanel {
  universe: Universe;
  rows: AuditRow[];
  defined: number;
  undefinedCount: number;
  delta: number | null;
  reference: number | null;
  breakdown: DecisionBreakdown[];
}

// The export lists each evaluation decision's baseline option first, and the
// all-baseline strategy is the one whose reading also fills the universe's
// record-level metrics. That row carries the reference marker.
export function referenceStrategy(evalDecisions: DecisionSpec[]): Record<string, string> {
  const strategy: Record<string, string> = {};
  for (const spec of evalDecisions) {
    strategy[spec.name] = spec.options[0];
  }
  return strategy;
}

function sameStrategy(
  a: Record<string, string>,
  b: Record<string, string>,
  specs: DecisionSpec[],
): boolean {
  return specs.every((spec) => a[spec.name] === b[spec.name]);
}

export function auditPanel(bundle: Bundle, universeId: string): AuditPanel {
  const universe = bundle.universes.find((u) => u.id === universeId);
  if (!universe) {
    throw new BundleError(`unknown universe id "${universeId}"`);
  }
  const reference = referenceStrategy(bundle.eval_decisions);
  const rows: AuditRow[] = universe.evals.map((entry) => ({
    strategy: entry.strategy,
    value: entry.status === STATUS_OK ? entry.eq_odds_diff : null,
    status: entry.status,
    isReference: sameStrategy(entry.strategy, reference, bundle.eval_decisions),
  }));

  const definedValues = rows
    .filter((r) => r.value !== null)
    .map((r) => r.value as number);
  const referenceRow = rows.find((r) => r.isReference);

  const breakdown: DecisionBreakdown[] = bundle.eval_decisions.map((spec) => ({
    decision: spec.name,
    options: spec.options.map((option) => {
      const values = rows
        .filter((r) => r.strategy[spec.name] === option && r.value !== null)
        .map((r) => r.value as number);
      return {
        option,
        count: values.length,
        mean: values.length > 0 ? values.reduce((s, v) => s + v, 0) / values.length : null,
      };
    }),
  }));

  return {
    universe,
    rows,
    defined: definedValues.length,
    undefinedCount: rows.length - definedValues.length,
    delta:
      definedValues.length > 0
        ? Math.max(...definedValues) - Math.min(...definedValues)
        : null,
    reference: referenceRow === undefined ? null : referenceRow.value,
    breakdown,
  };
}

export function formatDelta(delta: number | null): string {
  return delta === null ? "n/a" : delta.toFixed(2);
}
