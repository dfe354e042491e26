/** AdamW over the adapter matrices, with the run config's schedule mapped on. */

export interface AdamConfig {
  lr: number;
  beta1?: number;
  beta2?: number;
  eps?: number;
  weightDecay?: number;
}

export class AdamW {
  private readonly beta1: number;
  private readonly beta2: number;
  private readonly eps: number;
  private readonly weightDecay: number;
  readonly lr: number;
  private m: Float64Array[][] = [];
  private v: Float64Array[][] = [];
  private t = 0;

  constructor(config: AdamConfig) {
    this.lr = config.lr;
    this.beta1 = config.beta1 ?? 0.9;
    this.beta2 = config.beta2 ?? 0.999;
    this.eps = config.eps ?? 1e-8;
    this.weightDecay = config.weightDecay ?? 0.0;
  }

  /** One update over matching (params, grads) matrix lists. */
  step(params: Float64Array[][], grads: Float64Array[][], lrScale = 1.0): void {
    if (this.m.length === 0) {
      this.m = params.map((mat) => mat.map((row) => new Float64Array(row.length)));
      this.v = params.map((mat) => mat.map((row) => new Float64Array(row.length)));
    }
    this.t += 1;
    const lr = this.lr * lrScale;
    const correction1 = 1 - Math.pow(this.beta1, this.t);
    const correction2 = 1 - Math.pow(this.beta2, this.t);
    for (let p = 0; p < params.length; p++) {
      for (let r = 0; r < params[p].length; r++) {
        const w = params[p][r];
        const g = grads[p][r];
        const m = this.m[p][r];
        const v = this.v[p][r];
        for (let j = 0; j < w.length; j++) {
          m[j] = this.beta1 * m[j] + (1 - this.beta1) * g[j];
          v[j] = this.beta2 * v[j] + (1 - this.beta2) * g[j] * g[j];
          const mHat = m[j] / correction1;
          const vHat = v[j] / correction2;
          w[j] -= lr * (mHat / (Math.sqrt(vHat) + this.eps) + this.weightDecay * w[j]);
        }
      }
    }
  }
}

/** lr multiplier for one step index under the configured scheduler. */
export function scheduleScale(scheduler: string, step: number, totalSteps: number): number {
  if (scheduler === "cosine") {
    if (totalSteps <= 1) return 1.0;
    return 0.5 * (1 + Math.cos((Math.PI * step) / totalSteps));
  }
  return 1.0; // constant
}
