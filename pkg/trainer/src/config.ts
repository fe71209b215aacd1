/** Training configuration and defaults. */

export interface TrainConfig {
  gateway: string; // HOST:PORT of a tilebalance gateway with a level pool
  totalSteps: number;
  nEnvs: number;
  rolloutLen: number;
  hiddenSizes: number[]; // feature extractor and value head share this shape
  gamma: number;
  lambda: number;
  clipRatio: number;
  learningRate: number;
  valueCoef: number;
  entropyCoef: number;
  nEpochs: number;
  minibatchSize: number;
  seed: number;
  outDir: string;
  evalEvery: number; // policy updates between metric snapshots
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  gateway: "127.0.0.1:7850",
  totalSteps: 200_000,
  nEnvs: 8,
  rolloutLen: 512,
  hiddenSizes: [64, 128, 64],
  gamma: 0.99,
  lambda: 0.95,
  clipRatio: 0.2,
  learningRate: 3e-4,
  valueCoef: 0.5,
  entropyCoef: 0.01,
  nEpochs: 4,
  minibatchSize: 512,
  seed: 0,
  outDir: "checkpoints",
  evalEvery: 1,
};

export function validateConfig(cfg: TrainConfig): void {
  if (cfg.totalSteps < cfg.nEnvs * cfg.rolloutLen) {
    throw new Error(
      `totalSteps (${cfg.totalSteps}) must be >= nEnvs*rolloutLen (${cfg.nEnvs * cfg.rolloutLen})`
    );
  }
  if (cfg.nEnvs < 1 || cfg.rolloutLen < 1) throw new Error("nEnvs and rolloutLen must be >= 1");
  if (cfg.minibatchSize < 1) throw new Error("minibatchSize must be >= 1");
}
