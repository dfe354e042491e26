/** Record shapes shared with the dataset/run-config files the trainer consumes. */

export const IGNORE_INDEX = -100;

/** One tokenized training sample as emitted by the dataset pipeline. */
export interface TokenizedSample {
  sample_id: string;
  input_ids: number[];
  labels: number[];
  instruction_len: number;
}

/** One concrete training configuration from a sweep expansion. */
export interface RunConfig {
  run_id: string;
  learning_rate: number;
  lora_rank: number;
  lora_alpha: number;
  target_module_set: string;
  target_modules: string[];
  epochs: number;
  fixed: {
    lr_scheduler?: string;
    optimizer?: string;
    batch_size?: number;
    gradient_accumulation_steps?: number;
    lora_dropout?: number;
    [key: string]: unknown;
  };
}

export interface TrainReport {
  run_id: string;
  steps: number;
  loss_curve: [number, number][];
  final_loss: number;
  /** max |trainer loss - reference loss| over the probe batches; null when no reference endpoint was given */
  parity_check: number | null;
  warnings: string[];
}
