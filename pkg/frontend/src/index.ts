export { CliOptions, cliExecutable, runCli, runCliJson } from "./cli.js";
export {
  AdditiveNoise,
  NoiseVector,
  ReplacementNoise,
  SamplePayload,
  SpecInfo,
  applyNoise,
  applyNoiseCopy,
  noiseFromPayload,
} from "./noise.js";
export {
  AppliedSpec,
  BatchShape,
  CorruptBatchOptions,
  SampleOptions,
  TrainingSetOptions,
  corruptBatch,
  corruptBatchCopy,
  drawTrainingSpec,
  sampleFiniteP,
  sampleL0,
  sampleLinf,
} from "./bindings.js";
