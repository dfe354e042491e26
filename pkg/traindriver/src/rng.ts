/** Seeded PRNG (mulberry32) with a gaussian sampler, for reproducible inits. */

export type Rng = () => number;

export function mulberry32(seed: number): Rng {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) | 0;
    let t = Math.imul(state ^ (state >>> 15), 1 | state);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Box-Muller gaussian draw. */
export function gaussian(rng: Rng): number {
  let u = 0;
  while (u === 0) u = rng();
  const v = rng();
  return Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * v);
}

export function gaussianMatrix(rows: number, cols: number, std: number, rng: Rng): Float64Array[] {
  return Array.from({ length: rows }, () => {
    const row = new Float64Array(cols);
    for (let j = 0; j < cols; j++) row[j] = gaussian(rng) * std;
    return row;
  });
}

export function zeroMatrix(rows: number, cols: number): Float64Array[] {
  return Array.from({ length: rows }, () => new Float64Array(cols));
}
