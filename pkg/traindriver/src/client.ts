/** Client for the reference masked-cross-entropy endpoint of the dataset service. */

export interface ReferenceLoss {
  loss: number;
  term_count: number;
  per_position?: { index: number; term: number }[];
}

export async function referenceLoss(
  baseUrl: string,
  logits: Float64Array[],
  labels: number[],
  perPosition = false,
): Promise<ReferenceLoss> {
  const body = JSON.stringify({
    logits: logits.map((row) => Array.from(row)),
    labels,
    per_position: perPosition,
  });
  const response = await fetch(`${baseUrl.replace(/\/$/, "")}/loss/masked-cross-entropy`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body,
  });
  if (!response.ok) {
    throw new Error(`reference loss request failed: ${response.status} ${await response.text()}`);
  }
  return (await response.json()) as ReferenceLoss;
}
