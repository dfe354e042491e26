import { describe, expect, it } from "vitest";

import { maskedCrossEntropy, maskedCrossEntropyTerms } from "../src/loss.js";
import { IGNORE_INDEX } from "../src/types.js";

// same frozen oracle as the dataset toolkit's reference-loss suite:
// rows [1,2,3] (label 2) and [0.5,-0.5,0] (label 0), first row masked
const ORACLE_ROWS = [
  Float64Array.from([0.2, -1.1, 0.7]),
  Float64Array.from([1.0, 2.0, 3.0]),
  Float64Array.from([0.5, -0.5, 0.0]),
];
const ORACLE_LABELS = [IGNORE_INDEX, 2, 0];
const ORACLE_MEAN = 0.5439378175430574;

describe("masked cross entropy", () => {
  it("uniform logits give ln V", () => {
    for (const vocab of [2, 4, 33, 257]) {
      const logits = [new Float64Array(vocab)];
      expect(maskedCrossEntropy(logits, [1])).toBeCloseTo(Math.log(vocab), 9);
    }
  });

  it("matches the frozen hand-computed oracle", () => {
    expect(Math.abs(maskedCrossEntropy(ORACLE_ROWS, ORACLE_LABELS) - ORACLE_MEAN)).toBeLessThan(1e-9);
    const terms = maskedCrossEntropyTerms(ORACLE_ROWS, ORACLE_LABELS);
    expect(terms.map((t) => t.index)).toEqual([1, 2]);
  });

  it("never reads masked rows", () => {
    const base = maskedCrossEntropy(ORACLE_ROWS, ORACLE_LABELS);
    const perturbed = ORACLE_ROWS.map((row) => Float64Array.from(row));
    perturbed[0] = Float64Array.from([1e9, -1e9, 12345.6]);
    expect(maskedCrossEntropy(perturbed, ORACLE_LABELS)).toBe(base);
  });

  it("rejects an all-IGNORE batch", () => {
    expect(() => maskedCrossEntropy([new Float64Array(3)], [IGNORE_INDEX])).toThrow(/no trainable/);
  });

  it("rejects labels outside the vocabulary", () => {
    expect(() => maskedCrossEntropy([new Float64Array(3)], [3])).toThrow(/outside vocabulary/);
  });

  it("rejects length mismatches", () => {
    expect(() => maskedCrossEntropy([new Float64Array(3)], [1, 2])).toThrow(/labels/);
  });
});
