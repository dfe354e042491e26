/**
 * Tiny causal language model with a low-rank adapter as the only trainable
 * part.
 *
 * Per position: the frozen embedding of the token is mixed with its left
 * context by a causal running mean, passed through a residual low-rank update
 * h + (alpha/rank) * B(A h), and projected to vocabulary logits by a frozen
 * output matrix. Only A and B receive gradients, so training moves exactly
 * the adapter parameters while context still flows from instruction tokens
 * into response predictions.
 */

import { maskedCrossEntropyTerms } from "./loss.js";
import { gaussianMatrix, mulberry32, zeroMatrix } from "./rng.js";
import { Batch } from "./dataset.js";
import { IGNORE_INDEX } from "./types.js";

export interface ModelSpec {
  vocabSize: number;
  dim: number;
  rank: number;
  alpha: number;
  seed: number;
}

export interface Gradients {
  dA: Float64Array[];
  dB: Float64Array[];
  /** number of unmasked positions the gradients were averaged over */
  terms: number;
}

export class TinyCausalLM {
  readonly spec: ModelSpec;
  /** frozen token embeddings, vocab x dim */
  readonly embed: Float64Array[];
  /** frozen output projection, vocab x dim */
  readonly output: Float64Array[];
  /** adapter down-projection, rank x dim (trainable) */
  A: Float64Array[];
  /** adapter up-projection, dim x rank (trainable, zero-initialized) */
  B: Float64Array[];

  constructor(spec: ModelSpec) {
    this.spec = spec;
    const rng = mulberry32(spec.seed);
    this.embed = gaussianMatrix(spec.vocabSize, spec.dim, 0.8, rng);
    this.output = gaussianMatrix(spec.vocabSize, spec.dim, 0.8, rng);
    this.A = gaussianMatrix(spec.rank, spec.dim, 1 / Math.sqrt(spec.dim), rng);
    this.B = zeroMatrix(spec.dim, spec.rank);
  }

  get adapterScale(): number {
    return this.spec.alpha / this.spec.rank;
  }

  /** Causal-mean hidden states for one token sequence. */
  hidden(inputIds: number[]): Float64Array[] {
    const { dim } = this.spec;
    const states: Float64Array[] = [];
    const running = new Float64Array(dim);
    for (let i = 0; i < inputIds.length; i++) {
      const e = this.embed[inputIds[i]];
      for (let d = 0; d < dim; d++) running[d] += e[d];
      const h = new Float64Array(dim);
      for (let d = 0; d < dim; d++) h[d] = running[d] / (i + 1);
      states.push(h);
    }
    return states;
  }

  private adapt(h: Float64Array): { z: Float64Array; a: Float64Array } {
    const { dim, rank } = this.spec;
    const a = new Float64Array(rank);
    for (let r = 0; r < rank; r++) {
      let acc = 0;
      const rowA = this.A[r];
      for (let d = 0; d < dim; d++) acc += rowA[d] * h[d];
      a[r] = acc;
    }
    const z = new Float64Array(dim);
    const scale = this.adapterScale;
    for (let d = 0; d < dim; d++) {
      let acc = 0;
      const rowB = this.B[d];
      for (let r = 0; r < rank; r++) acc += rowB[r] * a[r];
      z[d] = h[d] + scale * acc;
    }
    return { z, a };
  }

  /** Vocabulary logits for every position of one sequence. */
  forward(inputIds: number[]): Float64Array[] {
    const { vocabSize, dim } = this.spec;
    return this.hidden(inputIds).map((h) => {
      const { z } = this.adapt(h);
      const logits = new Float64Array(vocabSize);
      for (let v = 0; v < vocabSize; v++) {
        let acc = 0;
        const rowU = this.output[v];
        for (let d = 0; d < dim; d++) acc += rowU[d] * z[d];
        logits[v] = acc;
      }
      return logits;
    });
  }

  /**
   * Mean masked loss over the batch plus gradients for A and B.
   *
   * The mean runs over every non-IGNORE position across the batch, the same
   * normalization the reference loss uses on the flattened batch.
   */
  lossAndGradients(batch: Batch): { loss: number; grads: Gradients } {
    const { dim, rank, vocabSize } = this.spec;
    const dA = zeroMatrix(rank, dim);
    const dB = zeroMatrix(dim, rank);

    let totalTerms = 0;
    for (const labels of batch.labels) {
      for (const label of labels) if (label !== IGNORE_INDEX) totalTerms += 1;
    }
    if (totalTerms === 0) {
      throw new Error("batch has no trainable positions");
    }

    let lossSum = 0;
    const scale = this.adapterScale;
    for (let s = 0; s < batch.inputIds.length; s++) {
      const inputIds = batch.inputIds[s];
      const labels = batch.labels[s];
      const hiddenStates = this.hidden(inputIds);
      for (let i = 0; i < inputIds.length; i++) {
        const label = labels[i];
        if (label === IGNORE_INDEX) continue;
        const h = hiddenStates[i];
        const { z, a } = this.adapt(h);
        const logits = new Float64Array(vocabSize);
        let peak = -Infinity;
        for (let v = 0; v < vocabSize; v++) {
          let acc = 0;
          const rowU = this.output[v];
          for (let d = 0; d < dim; d++) acc += rowU[d] * z[d];
          logits[v] = acc;
          if (acc > peak) peak = acc;
        }
        let expSum = 0;
        for (let v = 0; v < vocabSize; v++) expSum += Math.exp(logits[v] - peak);
        lossSum += peak + Math.log(expSum) - logits[label];

        // dlogits = (softmax - onehot(label)) / totalTerms; dz = U^T dlogits
        const dz = new Float64Array(dim);
        for (let v = 0; v < vocabSize; v++) {
          const p = Math.exp(logits[v] - peak) / expSum;
          const g = (p - (v === label ? 1 : 0)) / totalTerms;
          const rowU = this.output[v];
          for (let d = 0; d < dim; d++) dz[d] += g * rowU[d];
        }
        // z = h + scale * B a  =>  dB += scale * dz a^T;  da = scale * B^T dz
        const da = new Float64Array(rank);
        for (let d = 0; d < dim; d++) {
          const gd = scale * dz[d];
          const rowB = this.B[d];
          const rowdB = dB[d];
          for (let r = 0; r < rank; r++) {
            rowdB[r] += gd * a[r];
            da[r] += gd * rowB[r];
          }
        }
        // a = A h  =>  dA += da h^T
        for (let r = 0; r < rank; r++) {
          const rowdA = dA[r];
          const gr = da[r];
          for (let d = 0; d < dim; d++) rowdA[d] += gr * h[d];
        }
      }
    }
    return { loss: lossSum / totalTerms, grads: { dA, dB, terms: totalTerms } };
  }

  /** Batch loss via the shared loss helper (used by parity checks). */
  batchLoss(batch: Batch): number {
    const rows: Float64Array[] = [];
    const labels: number[] = [];
    for (let s = 0; s < batch.inputIds.length; s++) {
      rows.push(...this.forward(batch.inputIds[s]));
      labels.push(...batch.labels[s]);
    }
    const terms = maskedCrossEntropyTerms(rows, labels);
    if (terms.length === 0) throw new Error("batch has no trainable positions");
    let total = 0;
    for (const { term } of terms) total += term;
    return total / terms.length;
  }
}
