import { describe, expect, it } from "vitest";

import { BundleError, parseBundle } from "../src/bundle.js";

function doc(): any {
  return {
    decisions: [
      { name: "a", options: ["x", "y"] },
      { name: "b", options: ["p", "q"] },
    ],
    eval_decisions: [{ name: "e", options: ["k", "m"] }],
    universes: [
      {
        id: "u0",
        options: { a: "x", b: "p" },
        metrics: {
          status: "ok",
          eq_odds_diff: 0.25,
          f1: 0.5,
          accuracy: 0.75,
          balanced_accuracy: 0.6,
        },
        evals: [
          { strategy: { e: "k" }, eq_odds_diff: 0.25, status: "ok" },
          { strategy: { e: "m" }, eq_odds_diff: null, status: "metric-undefined" },
        ],
      },
    ],
    importance: [{ subset: ["a"], order: 1, importance: 1.0, std_dev: 0.0 }],
    summary: { universes: 1 },
  };
}

const parse = (value: unknown) => parseBundle(JSON.stringify(value));

describe("parseBundle", () => {
  it("accepts a well formed document", () => {
    const bundle = parse(doc());
    expect(bundle.decisions.map((d) => d.name)).toEqual(["a", "b"]);
    expect(bundle.eval_decisions[0].options).toEqual(["k", "m"]);
    expect(bundle.universes).toHaveLength(1);
    expect(bundle.universes[0].evals).toHaveLength(2);
    expect(bundle.importance).toHaveLength(1);
    expect(bundle.summary).toEqual({ universes: 1 });
  });

  it("rejects text that is not JSON", () => {
    expect(() => parseBundle("{nope")).toThrowError(BundleError);
    expect(() => parseBundle("{nope")).toThrowError(/not valid JSON/);
  });

  it("rejects a non-object root", () => {
    expect(() => parseBundle("[]")).toThrowError(/expected an object/);
  });

  it("rejects a missing universes array", () => {
    const d = doc();
    delete d.universes;
    expect(() => parse(d)).toThrowError(/universes: expected an array/);
  });

  it("rejects duplicate universe ids", () => {
    const d = doc();
    d.universes.push(structuredClone(d.universes[0]));
    expect(() => parse(d)).toThrowError(/duplicate universe id "u0"/);
  });

  it("rejects an option that is not part of the decision", () => {
    const d = doc();
    d.universes[0].options.a = "z";
    expect(() => parse(d)).toThrowError(/"z" is not an option of "a"/);
  });

  it("rejects an assignment naming an unknown decision", () => {
    const d = doc();
    d.universes[0].options.c = "x";
    expect(() => parse(d)).toThrowError(/unknown decision "c"/);
  });

  it("rejects a strategy that misses an evaluation decision", () => {
    const d = doc();
    d.universes[0].evals[0].strategy = {};
    expect(() => parse(d)).toThrowError(/missing decision "e"/);
  });

  it("rejects duplicate evaluation strategies within a universe", () => {
    const d = doc();
    d.universes[0].evals[1].strategy = { e: "k" };
    expect(() => parse(d)).toThrowError(/duplicate evaluation strategy/);
  });

  it("rejects an ok evaluation without a metric value", () => {
    const d = doc();
    d.universes[0].evals[0].eq_odds_diff = null;
    expect(() => parse(d)).toThrowError(/status "ok" with no metric value/);
  });

  it("rejects non-finite metric values", () => {
    // JSON.parse turns 1e999 into Infinity, which must not slip through.
    const text = JSON.stringify(doc()).replace("0.25,", "1e999,");
    expect(() => parseBundle(text)).toThrowError(/expected a finite number/);
  });

  it("rejects an evaluation decision that shadows a design decision", () => {
    const d = doc();
    d.eval_decisions[0].name = "a";
    d.universes[0].evals = [];
    expect(() => parse(d)).toThrowError(/"a" is also a design decision/);
  });

  it("accepts an empty multiverse and a missing summary", () => {
    const d = doc();
    d.universes = [];
    delete d.summary;
    const bundle = parse(d);
    expect(bundle.universes).toEqual([]);
    expect(bundle.summary).toBeNull();
  });

  it("parses the same text to the same state", () => {
    const text = JSON.stringify(doc());
    expect(parseBundle(text)).toEqual(parseBundle(text));
  });
});
