/**
 * Masked cross-entropy with the -100 ignore convention.
 *
 * Positions whose label is IGNORE contribute nothing; their logit rows are
 * never read. The mean is taken over the non-ignored positions only, matching
 * the reference implementation the parity tests compare against.
 */

import { IGNORE_INDEX } from "./types.js";

export interface LossTerm {
  index: number;
  term: number;
}

export function logSumExp(row: Float64Array): number {
  let peak = -Infinity;
  for (const x of row) if (x > peak) peak = x;
  let sum = 0;
  for (const x of row) sum += Math.exp(x - peak);
  return peak + Math.log(sum);
}

/** Per-position negative log-likelihood terms at the non-IGNORE positions. */
export function maskedCrossEntropyTerms(logits: Float64Array[], labels: number[]): LossTerm[] {
  if (logits.length !== labels.length) {
    throw new Error(`got ${labels.length} labels for ${logits.length} logit rows`);
  }
  const terms: LossTerm[] = [];
  for (let i = 0; i < labels.length; i++) {
    const label = labels[i];
    if (label === IGNORE_INDEX) continue;
    const row = logits[i];
    if (label < 0 || label >= row.length) {
      throw new Error(`label ${label} at position ${i} outside vocabulary of size ${row.length}`);
    }
    terms.push({ index: i, term: logSumExp(row) - row[label] });
  }
  return terms;
}

export function maskedCrossEntropy(logits: Float64Array[], labels: number[]): number {
  const terms = maskedCrossEntropyTerms(logits, labels);
  if (terms.length === 0) {
    throw new Error("no trainable positions: every label is IGNORE");
  }
  let total = 0;
  for (const { term } of terms) total += term;
  return total / terms.length;
}
