/**
 * Mask-semantics verification: for a fixed model state, loss terms must exist
 * only at positions predicting response tokens, masked positions must
 * contribute exactly zero, and (when a reference endpoint is available) every
 * per-position term must match the reference implementation.
 */

import { maskedCrossEntropyTerms } from "./loss.js";
import { LoadedDataset, remapSample } from "./dataset.js";
import { TinyCausalLM } from "./model.js";
import { referenceLoss } from "./client.js";
import { IGNORE_INDEX } from "./types.js";

export interface VerifyReport {
  samples_checked: number;
  max_reference_deviation: number | null;
  failures: string[];
}

export async function verifyMaskSemantics(
  dataset: LoadedDataset,
  model: TinyCausalLM,
  options: { referenceUrl?: string; maxSamples?: number; tolerance?: number } = {},
): Promise<VerifyReport> {
  const tolerance = options.tolerance ?? 1e-5;
  const failures: string[] = [];
  let maxDeviation: number | null = options.referenceUrl ? 0 : null;
  const samples = dataset.samples.slice(0, options.maxSamples ?? dataset.samples.length);

  for (const sample of samples) {
    const { inputIds, labels } = remapSample(sample, dataset.idMap);
    const logits = model.forward(inputIds);
    const terms = maskedCrossEntropyTerms(logits, labels);

    const expected = new Set<number>();
    for (let i = sample.instruction_len - 1; i < labels.length - 1; i++) expected.add(i);
    const got = new Set(terms.map((t) => t.index));
    for (const index of got) {
      if (labels[index] === IGNORE_INDEX) {
        failures.push(`${sample.sample_id}: loss term at masked position ${index}`);
      }
    }
    if (got.size !== expected.size || [...expected].some((i) => !got.has(i))) {
      failures.push(`${sample.sample_id}: loss terms not exactly at the response-predicting positions`);
    }

    if (options.referenceUrl) {
      const reference = await referenceLoss(options.referenceUrl, logits, labels, true);
      const referenceTerms = new Map((reference.per_position ?? []).map((t) => [t.index, t.term]));
      if (referenceTerms.size !== terms.length) {
        failures.push(`${sample.sample_id}: reference reports ${referenceTerms.size} terms, trainer has ${terms.length}`);
      }
      for (const { index, term } of terms) {
        const ref = referenceTerms.get(index);
        if (ref === undefined) {
          failures.push(`${sample.sample_id}: reference missing term at ${index}`);
          continue;
        }
        const deviation = Math.abs(ref - term);
        if (maxDeviation !== null) maxDeviation = Math.max(maxDeviation, deviation);
        if (deviation > tolerance) {
          failures.push(`${sample.sample_id}: per-position deviation ${deviation} at ${index}`);
        }
      }
    }
  }
  return { samples_checked: samples.length, max_reference_deviation: maxDeviation, failures };
}
