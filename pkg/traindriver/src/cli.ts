#!/usr/bin/env node
/**
 * traindrive: train a toy low-rank adapter on a tokenized, masked dataset.
 *
 * Usage:
 *   traindrive --dataset <tokenized.jsonl> --config <run_config.json> [--model tiny]
 *              [--dim 32] [--seed 12] [--reference-url http://host:port]
 *              [--out train_report.json] [--verify-masks]
 */

import * as fs from "fs";

import { loadDataset } from "./dataset.js";
import { trainAdapter, writeReport } from "./trainer.js";
import { verifyMaskSemantics } from "./verify.js";
import { RunConfig } from "./types.js";

function parseArg(name: string): string | undefined {
  const index = process.argv.indexOf(`--${name}`);
  if (index === -1) return undefined;
  return process.argv[index + 1];
}

function hasFlag(name: string): boolean {
  return process.argv.includes(`--${name}`);
}

async function main(): Promise<void> {
  const datasetPath = parseArg("dataset");
  const configPath = parseArg("config");
  if (!datasetPath || !configPath) {
    console.error("usage: traindrive --dataset <tokenized.jsonl> --config <run_config.json> [options]");
    process.exit(2);
  }
  const modelSpec = parseArg("model") ?? "tiny";
  if (modelSpec !== "tiny") {
    console.error(`unknown model spec ${modelSpec}; only "tiny" is available`);
    process.exit(2);
  }

  const config = JSON.parse(fs.readFileSync(configPath, "utf-8")) as RunConfig;
  const dataset = loadDataset(datasetPath);
  console.log(
    `run ${config.run_id}: ${dataset.samples.length} samples, vocab ${dataset.vocabSize}, ` +
      `rank ${config.lora_rank}, alpha ${config.lora_alpha}, lr ${config.learning_rate}`,
  );

  const { report, model } = await trainAdapter(dataset, config, {
    dim: Number(parseArg("dim") ?? 32),
    seed: Number(parseArg("seed") ?? 12),
    referenceUrl: parseArg("reference-url"),
    onStep: (step, loss) => console.log(`step ${step}: loss ${loss.toFixed(4)}`),
  });

  if (hasFlag("verify-masks")) {
    const verdict = await verifyMaskSemantics(dataset, model, {
      referenceUrl: parseArg("reference-url"),
      maxSamples: 8,
    });
    if (verdict.failures.length > 0) {
      console.error(`mask semantics FAILED:\n${verdict.failures.join("\n")}`);
      process.exit(1);
    }
    console.log(
      `mask semantics ok over ${verdict.samples_checked} samples` +
        (verdict.max_reference_deviation !== null
          ? ` (max reference deviation ${verdict.max_reference_deviation.toExponential(2)})`
          : ""),
    );
  }

  const outPath = parseArg("out") ?? "train_report.json";
  writeReport(outPath, report);
  console.log(
    `final loss ${report.final_loss.toFixed(4)} after ${report.steps} steps; ` +
      `parity ${report.parity_check === null ? "skipped" : report.parity_check.toExponential(2)}; wrote ${outPath}`,
  );
  for (const warning of report.warnings) console.warn(`warning: ${warning}`);
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});
