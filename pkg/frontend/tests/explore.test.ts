import { describe, expect, it } from "vitest";

import { BundleError, parseBundle } from "../src/bundle.js";
import {
  HISTOGRAM_BINS,
  histogramCounts,
  initialState,
  metricStats,
  scatterPoints,
  visibleUniverses,
} from "../src/explore.js";
import { renderHistogram, renderUniverseTable } from "../src/render.js";

// A deliberately sparse multiverse (not a full grid) so that filter
// combinations can produce an empty intersection.
function sparseBundle() {
  const universe = (id: string, a: string, b: string, value: number | null) => ({
    id,
    options: { a, b },
    metrics: {
      status: value === null ? "degenerate-labels" : "ok",
      eq_odds_diff: value,
      f1: value === null ? null : 0.8,
      accuracy: value === null ? null : 0.9,
      balanced_accuracy: value === null ? null : 0.85,
    },
    evals: [],
  });
  return parseBundle(
    JSON.stringify({
      decisions: [
        { name: "a", options: ["x", "y"] },
        { name: "b", options: ["p", "q", "r"] },
      ],
      eval_decisions: [{ name: "e", options: ["k"] }],
      universes: [
        universe("u0", "x", "p", 0.0),
        universe("u1", "x", "q", 0.05),
        universe("u2", "y", "q", 0.5),
        universe("u3", "y", "r", 1.0),
        universe("u4", "x", "r", null),
      ],
      importance: [],
      summary: {},
    }),
  );
}

describe("visibleUniverses", () => {
  const bundle = sparseBundle();

  it("shows everything under the empty filter", () => {
    expect(visibleUniverses(bundle, {}).map((u) => u.id)).toEqual([
      "u0",
      "u1",
      "u2",
      "u3",
      "u4",
    ]);
    expect(initialState(bundle).filters).toEqual({});
  });

  it("intersects selections across decisions", () => {
    const visible = visibleUniverses(bundle, { a: ["x"], b: ["q"] });
    expect(visible.map((u) => u.id)).toEqual(["u1"]);
  });

  it("unions selections within one decision", () => {
    const visible = visibleUniverses(bundle, { b: ["p", "q"] });
    expect(visible.map((u) => u.id)).toEqual(["u0", "u1", "u2"]);
  });

  it("treats an empty selection as no constraint", () => {
    expect(visibleUniverses(bundle, { a: [] })).toHaveLength(5);
  });

  it("selecting every option everywhere is the identity", () => {
    const visible = visibleUniverses(bundle, { a: ["x", "y"], b: ["p", "q", "r"] });
    expect(visible).toHaveLength(5);
  });

  it("can produce an empty view, which renders as an empty state", () => {
    const visible = visibleUniverses(bundle, { a: ["y"], b: ["p"] });
    expect(visible).toEqual([]);
    expect(renderUniverseTable(visible, bundle.decisions, null)).toContain(
      "no universes match the current filters",
    );
    expect(renderHistogram(histogramCounts(visible))).toContain(
      "no defined metric values",
    );
  });

  it("rejects filters naming unknown decisions or options", () => {
    expect(() => visibleUniverses(bundle, { c: ["x"] })).toThrowError(BundleError);
    expect(() => visibleUniverses(bundle, { a: ["z"] })).toThrowError(
      /"z" is not an option of decision "a"/,
    );
  });
});

describe("aggregates", () => {
  const bundle = sparseBundle();
  const all = visibleUniverses(bundle, {});

  it("bins the metric over [0, 1] with a closed top bin", () => {
    const counts = histogramCounts(all);
    expect(counts).toHaveLength(HISTOGRAM_BINS);
    expect(counts[0]).toBe(1); // 0.0
    expect(counts[1]).toBe(1); // 0.05
    expect(counts[10]).toBe(1); // 0.5
    expect(counts[19]).toBe(1); // 1.0 folds into the last bin
    expect(counts.reduce((s, c) => s + c, 0)).toBe(4);
  });

  it("summarizes the visible metric values and counts the undefined", () => {
    const stats = metricStats(all);
    expect(stats.visible).toBe(5);
    expect(stats.ok).toBe(4);
    expect(stats.errored).toBe(1);
    expect(stats.min).toBe(0.0);
    expect(stats.max).toBe(1.0);
    expect(stats.mean).toBeCloseTo(0.3875, 12);
  });

  it("returns null stats for an empty view", () => {
    const stats = metricStats([]);
    expect(stats.visible).toBe(0);
    expect(stats.min).toBeNull();
    expect(stats.mean).toBeNull();
  });

  it("pairs fairness with the chosen performance metric", () => {
    const points = scatterPoints(all, "f1");
    expect(points).toHaveLength(4);
    expect(points[0]).toEqual({ id: "u0", fairness: 0.0, performance: 0.8 });
    const accuracy = scatterPoints(all, "accuracy");
    expect(accuracy.every((p) => p.performance === 0.9)).toBe(true);
  });
});
