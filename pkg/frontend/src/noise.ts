/**
 * Noise application on caller-provided float32 buffers.
 *
 * Arithmetic mirrors the reference pipeline exactly: upcast to float64, add
 * (or replace for the component-replacement family), clamp to [0, 1] in
 * float64, then round to float32. `Math.fround` performs the same
 * round-to-nearest-even float32 conversion as a numpy float64->float32 cast,
 * so outputs are bit-identical for identical inputs and noise.
 */

export interface SpecInfo {
  p: string;
  epsilon: number;
  mode: string;
  clamp?: boolean;
}

export interface AdditiveNoise {
  kind: "additive";
  p: string;
  epsilon: number;
  components: Float64Array;
}

export interface ReplacementNoise {
  kind: "replacement";
  p: string;
  epsilon: number;
  indices: Int32Array;
  values: Float64Array;
}

export type NoiseVector = AdditiveNoise | ReplacementNoise;

/** Raw JSON shape of one sample emitted by `lpcorrupt sample --json`. */
export interface SamplePayload {
  components?: number[];
  indices?: number[];
  values?: number[];
}

export function noiseFromPayload(payload: SamplePayload, p: string, epsilon: number): NoiseVector {
  if (payload.components !== undefined) {
    return {
      kind: "additive",
      p,
      epsilon,
      components: Float64Array.from(payload.components),
    };
  }
  if (payload.indices === undefined || payload.values === undefined) {
    throw new Error("sample payload carries neither components nor indices/values");
  }
  return {
    kind: "replacement",
    p,
    epsilon,
    indices: Int32Array.from(payload.indices),
    values: Float64Array.from(payload.values),
  };
}

function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

/**
 * Apply noise to a float32 buffer in place (no allocation beyond the noise
 * itself). `offset`/`length` select one image inside a larger batch buffer.
 */
export function applyNoise(
  buffer: Float32Array,
  noise: NoiseVector,
  clamp: boolean,
  offset = 0,
  length?: number
): void {
  const d = length ?? buffer.length - offset;
  if (offset < 0 || offset + d > buffer.length) {
    throw new Error(`slice [${offset}, ${offset + d}) exceeds buffer of ${buffer.length}`);
  }
  if (noise.kind === "additive") {
    if (noise.components.length !== d) {
      throw new Error(
        `length mismatch: image has ${d} components, noise has ${noise.components.length}`
      );
    }
    if (clamp) {
      for (let i = 0; i < d; i++) {
        buffer[offset + i] = Math.fround(clamp01(buffer[offset + i] + noise.components[i]));
      }
    } else {
      for (let i = 0; i < d; i++) {
        buffer[offset + i] = Math.fround(buffer[offset + i] + noise.components[i]);
      }
    }
    return;
  }
  for (let j = 0; j < noise.indices.length; j++) {
    const i = noise.indices[j];
    if (i < 0 || i >= d) {
      throw new Error(`replacement index ${i} out of range for length ${d}`);
    }
    const v = clamp ? clamp01(noise.values[j]) : noise.values[j];
    buffer[offset + i] = Math.fround(v);
  }
}

/** Copying variant for callers that must not mutate their buffer. */
export function applyNoiseCopy(
  buffer: Float32Array,
  noise: NoiseVector,
  clamp: boolean
): Float32Array {
  const out = buffer.slice();
  applyNoise(out, noise, clamp);
  return out;
}
