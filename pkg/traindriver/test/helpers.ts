import * as path from "path";
import { fileURLToPath } from "url";

export const FIXTURES_DIR = path.join(path.dirname(fileURLToPath(import.meta.url)), ".fixtures");
export const SERVICE_PORT = 8761;
export const SERVICE_URL = `http://127.0.0.1:${SERVICE_PORT}`;

export const DATASET_PATH = path.join(FIXTURES_DIR, "tokenized.jsonl");
export const TOY_RUNS_DIR = path.join(FIXTURES_DIR, "runs_toy");
export const FULL_RUNS_DIR = path.join(FIXTURES_DIR, "runs_full");
