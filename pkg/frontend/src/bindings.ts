/**
 * The five binding operations: sampleFiniteP / sampleL0 / sampleLinf,
 * drawTrainingSpec, and corruptBatch (shared-noise minibatch application).
 *
 * No sampling logic lives here: draws come from the reference CLI, which
 * derives noise for group g at master seed S from the stream
 * RngStream(S, g).generator(1, 0) after drawing the group's spec from
 * generator(0) — the same discipline the dataset pipeline uses, so
 * corruptBatch output is bit-identical to the pipeline's on equal inputs.
 */

import { CliOptions, runCliJson } from "./cli.js";
import { NoiseVector, SamplePayload, SpecInfo, applyNoise, noiseFromPayload } from "./noise.js";

export interface SampleOptions extends CliOptions {
  seed: number;
  streamIndex?: number;
  mode?: string; // ball | sphere | exponent:k
}

interface SampleResponse {
  spec: { p: string; epsilon: number; mode: string; clamp?: boolean };
  samples: SamplePayload[];
}

function sampleExplicit(p: string, d: number, epsilon: number, options: SampleOptions): NoiseVector {
  const args = [
    "sample",
    "--p", p,
    "--eps", String(epsilon),
    "--d", String(d),
    "--seed", String(options.seed),
    "--stream-index", String(options.streamIndex ?? 0),
  ];
  if (options.mode !== undefined) {
    args.push("--mode", options.mode);
  }
  const payload = runCliJson<SampleResponse>(args, options);
  return noiseFromPayload(payload.samples[0], payload.spec.p, payload.spec.epsilon);
}

/** Uniform draw from the p-norm ball/sphere of radius epsilon, 0 < p < inf. */
export function sampleFiniteP(d: number, p: number, epsilon: number, options: SampleOptions): NoiseVector {
  if (!(p > 0) || !Number.isFinite(p)) {
    throw new Error(`sampleFiniteP requires a finite p > 0, got ${p}`);
  }
  return sampleExplicit(String(p), d, epsilon, options);
}

/** Component-replacement corruption: round(epsilon*d) components set to {0,1}. */
export function sampleL0(d: number, epsilon: number, options: SampleOptions): NoiseVector {
  return sampleExplicit("0", d, epsilon, options);
}

/** Per-component uniform noise on [-epsilon, epsilon]. */
export function sampleLinf(d: number, epsilon: number, options: SampleOptions): NoiseVector {
  return sampleExplicit("inf", d, epsilon, options);
}

export interface TrainingSetOptions extends CliOptions {
  set: string;
  profile?: string; // cifar | tin; required for built-in set names
  seed: number;
}

interface SetSampleResponse {
  spec: { p: string; epsilon: number; mode: string; clamp: boolean };
  samples: SamplePayload[];
}

function setArgs(options: TrainingSetOptions, d: number, groupIndex: number): string[] {
  const args = [
    "sample",
    "--set", options.set,
    "--d", String(d),
    "--seed", String(options.seed),
    "--group-index", String(groupIndex),
  ];
  if (options.profile !== undefined) {
    args.push("--profile", options.profile);
  }
  return args;
}

/** The (p, epsilon) a training run would apply to group `groupIndex`. */
export function drawTrainingSpec(options: TrainingSetOptions, groupIndex = 0): SpecInfo {
  const payload = runCliJson<SetSampleResponse>(
    [...setArgs(options, 1, groupIndex), "--draw-only"],
    options
  );
  return payload.spec;
}

export interface BatchShape {
  batch: number;
  channels: number;
  height: number;
  width: number;
}

export interface CorruptBatchOptions extends TrainingSetOptions {
  /** Images per shared noise draw; the training default is 8. */
  shareGroup?: number;
  /** "default" follows each spec's own clamp flag; "on"/"off" override. */
  clamp?: "default" | "on" | "off";
}

export interface AppliedSpec extends SpecInfo {
  groupId: number;
  /** image indices (within the batch) the realization was applied to */
  members: number[];
  clampApplied: boolean;
}

/**
 * Corrupt a contiguous float32 (B, C, H, W) batch in place: one spec drawn
 * per group of `shareGroup` consecutive images, one noise realization shared
 * across the group. Returns the applied (p, epsilon) record per group.
 */
export function corruptBatch(
  batch: Float32Array,
  shape: BatchShape,
  options: CorruptBatchOptions
): AppliedSpec[] {
  const d = shape.channels * shape.height * shape.width;
  if (shape.batch < 1 || d < 1) {
    throw new Error(`invalid batch shape ${JSON.stringify(shape)}`);
  }
  if (batch.length !== shape.batch * d) {
    throw new Error(
      `shape mismatch: buffer has ${batch.length} floats, shape needs ${shape.batch * d}`
    );
  }
  const shareGroup = options.shareGroup ?? 8;
  if (shareGroup < 1) {
    throw new Error(`shareGroup must be >= 1, got ${shareGroup}`);
  }
  const override = options.clamp ?? "default";
  const records: AppliedSpec[] = [];
  const nGroups = Math.ceil(shape.batch / shareGroup);
  for (let g = 0; g < nGroups; g++) {
    const payload = runCliJson<SetSampleResponse>(setArgs(options, d, g), options);
    const clamp = override === "default" ? payload.spec.clamp : override === "on";
    const members: number[] = [];
    const isIdentity = payload.spec.p === "identity";
    const noise = isIdentity
      ? null
      : noiseFromPayload(payload.samples[0], payload.spec.p, payload.spec.epsilon);
    for (let b = g * shareGroup; b < Math.min((g + 1) * shareGroup, shape.batch); b++) {
      if (noise !== null) {
        applyNoise(batch, noise, clamp, b * d, d);
      }
      members.push(b);
    }
    records.push({ ...payload.spec, groupId: g, members, clampApplied: clamp });
  }
  return records;
}

/** Copying variant of corruptBatch for immutable callers. */
export function corruptBatchCopy(
  batch: Float32Array,
  shape: BatchShape,
  options: CorruptBatchOptions
): { batch: Float32Array; records: AppliedSpec[] } {
  const out = batch.slice();
  const records = corruptBatch(out, shape, options);
  return { batch: out, records };
}
