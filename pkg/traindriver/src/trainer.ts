/**
 * Adapter training driver: one pass over the dataset per configured epoch
 * (the emitted run configs always say 1), gradient accumulation and batch
 * size from the run config, and only the adapter matrices updated.
 */

import * as fs from "fs";

import { Batch, LoadedDataset, makeBatches, unmaskedCount } from "./dataset.js";
import { TinyCausalLM } from "./model.js";
import { AdamW, scheduleScale } from "./optim.js";
import { referenceLoss } from "./client.js";
import { RunConfig, TrainReport } from "./types.js";

export interface TrainOptions {
  /** model width; vocab comes from the dataset */
  dim?: number;
  seed?: number;
  /** service base URL for the cross-implementation parity probe */
  referenceUrl?: string;
  /** number of probe batches for the parity check */
  probeBatches?: number;
  onStep?: (step: number, loss: number) => void;
}

export interface TrainOutcome {
  report: TrainReport;
  model: TinyCausalLM;
}

function mappedOptimizer(config: RunConfig, warnings: string[]): string {
  const requested = String(config.fixed.optimizer ?? "adamw_torch_fused");
  if (requested !== "adamw") {
    warnings.push(`optimizer ${requested} mapped to plain AdamW (fused variants unavailable here)`);
  }
  return "adamw";
}

function mappedScheduler(config: RunConfig, warnings: string[]): string {
  const requested = String(config.fixed.lr_scheduler ?? "cosine");
  if (requested === "cosine" || requested === "constant") return requested;
  warnings.push(`lr scheduler ${requested} unknown; using constant`);
  return "constant";
}

export async function trainAdapter(
  dataset: LoadedDataset,
  config: RunConfig,
  options: TrainOptions = {},
): Promise<TrainOutcome> {
  const warnings: string[] = [];
  if (config.epochs !== 1) {
    throw new Error(`run config ${config.run_id} must train for exactly 1 epoch, got ${config.epochs}`);
  }
  mappedOptimizer(config, warnings);
  const scheduler = mappedScheduler(config, warnings);

  const batchSize = Number(config.fixed.batch_size ?? 2);
  const accumulation = Number(config.fixed.gradient_accumulation_steps ?? 1);
  if ((config.fixed.lora_dropout ?? 0) !== 0) {
    warnings.push("lora_dropout ignored at toy scale (deterministic training)");
  }

  const model = new TinyCausalLM({
    vocabSize: dataset.vocabSize,
    dim: options.dim ?? 32,
    rank: config.lora_rank,
    alpha: config.lora_alpha,
    seed: options.seed ?? 12,
  });
  const frozenEmbedBefore = model.embed.map((row) => Float64Array.from(row));

  const batches = makeBatches(dataset, batchSize);
  for (const batch of batches) {
    if (unmaskedCount(batch) === 0) {
      throw new Error(`batch starting at ${batch.sampleIds[0]} has no trainable positions`);
    }
  }

  const optimizer = new AdamW({ lr: config.learning_rate });
  const totalUpdates = Math.max(1, Math.ceil(batches.length / accumulation));
  const lossCurve: [number, number][] = [];
  let step = 0;
  let updateIndex = 0;

  // exactly one epoch
  let pendingA = model.A.map((row) => new Float64Array(row.length));
  let pendingB = model.B.map((row) => new Float64Array(row.length));
  let pendingCount = 0;

  const flush = () => {
    if (pendingCount === 0) return;
    for (const rows of [pendingA, pendingB]) {
      for (const row of rows) for (let j = 0; j < row.length; j++) row[j] /= pendingCount;
    }
    optimizer.step([model.A, model.B], [pendingA, pendingB], scheduleScale(scheduler, updateIndex, totalUpdates));
    updateIndex += 1;
    pendingA = model.A.map((row) => new Float64Array(row.length));
    pendingB = model.B.map((row) => new Float64Array(row.length));
    pendingCount = 0;
  };

  for (const batch of batches) {
    const { loss, grads } = model.lossAndGradients(batch);
    if (!Number.isFinite(loss)) {
      throw new Error(`non-finite loss at step ${step}`);
    }
    step += 1;
    lossCurve.push([step, loss]);
    options.onStep?.(step, loss);
    for (let r = 0; r < pendingA.length; r++)
      for (let j = 0; j < pendingA[r].length; j++) pendingA[r][j] += grads.dA[r][j];
    for (let r = 0; r < pendingB.length; r++)
      for (let j = 0; j < pendingB[r].length; j++) pendingB[r][j] += grads.dB[r][j];
    pendingCount += 1;
    if (pendingCount >= accumulation) flush();
  }
  flush();

  // frozen parameters must not have moved
  for (let v = 0; v < model.embed.length; v++) {
    for (let d = 0; d < model.embed[v].length; d++) {
      if (model.embed[v][d] !== frozenEmbedBefore[v][d]) {
        throw new Error("frozen embedding changed during training");
      }
    }
  }

  let parity: number | null = null;
  if (options.referenceUrl) {
    parity = await parityCheck(model, batches, options.referenceUrl, options.probeBatches ?? 20);
  } else {
    warnings.push("no reference endpoint given; parity_check not performed");
  }

  const report: TrainReport = {
    run_id: config.run_id,
    steps: step,
    loss_curve: lossCurve,
    final_loss: lossCurve[lossCurve.length - 1][1],
    parity_check: parity,
    warnings,
  };
  return { report, model };
}

/** Max |trainer batch loss - reference masked cross-entropy| over probe batches. */
export async function parityCheck(
  model: TinyCausalLM,
  batches: Batch[],
  referenceUrl: string,
  probeBatches: number,
): Promise<number> {
  let worst = 0;
  const probes = batches.slice(0, probeBatches);
  for (const batch of probes) {
    const rows: Float64Array[] = [];
    const labels: number[] = [];
    for (let s = 0; s < batch.inputIds.length; s++) {
      rows.push(...model.forward(batch.inputIds[s]));
      labels.push(...batch.labels[s]);
    }
    const local = model.batchLoss(batch);
    const remote = await referenceLoss(referenceUrl, rows, labels);
    worst = Math.max(worst, Math.abs(local - remote.loss));
  }
  return worst;
}

export function writeReport(path: string, report: TrainReport): void {
  fs.writeFileSync(path, JSON.stringify(report, null, 2) + "\n", "utf-8");
}
