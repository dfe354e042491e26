/**
 * Reader for the tokenized JSONL dataset format (input_ids, labels with -100,
 * instruction_len) plus dense vocabulary remapping and batch collation.
 *
 * Token ids come from whatever tokenizer produced the file; the toy model
 * wants a dense embedding table, so ids are remapped to [0, vocab) in sorted
 * order. Labels are remapped identically, with the IGNORE sentinel untouched.
 */

import * as fs from "fs";

import { IGNORE_INDEX, TokenizedSample } from "./types.js";

export interface LoadedDataset {
  samples: TokenizedSample[];
  /** dense remap: original id -> [0, vocabSize) */
  idMap: Map<number, number>;
  vocabSize: number;
}

function validateSample(sample: TokenizedSample, line: number): void {
  const n = sample.input_ids.length;
  if (sample.labels.length !== n) {
    throw new Error(`${sample.sample_id} (line ${line}): labels/input_ids length mismatch`);
  }
  if (n === 0) {
    throw new Error(`${sample.sample_id} (line ${line}): empty sample`);
  }
  if (sample.labels[n - 1] !== IGNORE_INDEX) {
    throw new Error(`${sample.sample_id} (line ${line}): final label must be IGNORE`);
  }
  let unmasked = 0;
  for (let i = 0; i < n; i++) {
    const label = sample.labels[i];
    if (label === IGNORE_INDEX) continue;
    unmasked += 1;
    if (i + 1 >= n || label !== sample.input_ids[i + 1]) {
      throw new Error(`${sample.sample_id} (line ${line}): label at ${i} is not the shifted input id`);
    }
  }
  if (unmasked === 0) {
    // same guard as the dataset producer: nothing to train on
    throw new Error(`${sample.sample_id} (line ${line}): no trainable positions (all labels IGNORE)`);
  }
}

export function loadDataset(path: string): LoadedDataset {
  const text = fs.readFileSync(path, "utf-8");
  const samples: TokenizedSample[] = [];
  const ids = new Set<number>();
  let line = -1;
  for (const raw of text.split("\n")) {
    line += 1;
    if (!raw.trim()) continue;
    let record: TokenizedSample;
    try {
      record = JSON.parse(raw) as TokenizedSample;
    } catch (err) {
      throw new Error(`${path}: corrupt record at line ${line}: ${(err as Error).message}`);
    }
    validateSample(record, line);
    for (const id of record.input_ids) ids.add(id);
    samples.push(record);
  }
  if (samples.length === 0) {
    throw new Error(`${path}: dataset is empty`);
  }
  const sorted = [...ids].sort((a, b) => a - b);
  const idMap = new Map<number, number>(sorted.map((id, dense) => [id, dense]));
  return { samples, idMap, vocabSize: sorted.length };
}

export interface Batch {
  sampleIds: string[];
  /** dense-remapped token ids, one row per sample (ragged, no padding needed) */
  inputIds: number[][];
  /** dense-remapped labels with IGNORE kept as-is */
  labels: number[][];
}

export function remapSample(sample: TokenizedSample, idMap: Map<number, number>): { inputIds: number[]; labels: number[] } {
  const inputIds = sample.input_ids.map((id) => {
    const dense = idMap.get(id);
    if (dense === undefined) throw new Error(`${sample.sample_id}: id ${id} missing from vocabulary map`);
    return dense;
  });
  const labels = sample.labels.map((label) => (label === IGNORE_INDEX ? IGNORE_INDEX : idMap.get(label)!));
  return { inputIds, labels };
}

export function makeBatches(dataset: LoadedDataset, batchSize: number): Batch[] {
  const batches: Batch[] = [];
  for (let start = 0; start < dataset.samples.length; start += batchSize) {
    const slice = dataset.samples.slice(start, start + batchSize);
    const batch: Batch = { sampleIds: [], inputIds: [], labels: [] };
    for (const sample of slice) {
      const { inputIds, labels } = remapSample(sample, dataset.idMap);
      batch.sampleIds.push(sample.sample_id);
      batch.inputIds.push(inputIds);
      batch.labels.push(labels);
    }
    batches.push(batch);
  }
  return batches;
}

/** Total non-IGNORE labels in a batch; a batch with zero is refused upstream. */
export function unmaskedCount(batch: Batch): number {
  let count = 0;
  for (const labels of batch.labels) for (const label of labels) if (label !== IGNORE_INDEX) count += 1;
  return count;
}
