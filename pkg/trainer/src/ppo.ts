/**
 * PPO core: rollout buffer with GAE, clipped surrogate update.
 */

import * as tf from "@tensorflow/tfjs";
import { ActorCritic } from "./model";

export interface Transition {
  obs: Float32Array;
  action: number[];
  reward: number;
  done: boolean;
  value: number;
  logProb: number;
}

export interface RolloutBatch {
  obs: Float32Array[];
  actions: number[][];
  logProbs: Float32Array;
  advantages: Float32Array;
  returns: Float32Array;
}

export class RolloutBuffer {
  private perEnv: Transition[][];

  constructor(readonly nEnvs: number) {
    this.perEnv = Array.from({ length: nEnvs }, () => []);
  }

  add(env: number, t: Transition): void {
    this.perEnv[env].push(t);
  }

  get size(): number {
    return this.perEnv.reduce((a, e) => a + e.length, 0);
  }

  /**
   * Flatten all env streams into one batch with GAE(gamma, lambda)
   * advantages. lastValues bootstraps each env's truncated tail; a done
   * transition blocks bootstrapping across episode ends.
   */
  finish(lastValues: Float32Array, gamma: number, lambda: number): RolloutBatch {
    const obs: Float32Array[] = [];
    const actions: number[][] = [];
    const logProbs: number[] = [];
    const advantages: number[] = [];
    const returns: number[] = [];
    for (let e = 0; e < this.nEnvs; e++) {
      const steps = this.perEnv[e];
      const adv = new Float64Array(steps.length);
      let nextAdvantage = 0;
      let nextValue = lastValues[e];
      for (let i = steps.length - 1; i >= 0; i--) {
        const t = steps[i];
        const nonTerminal = t.done ? 0 : 1;
        const delta = t.reward + gamma * nextValue * nonTerminal - t.value;
        nextAdvantage = delta + gamma * lambda * nonTerminal * nextAdvantage;
        adv[i] = nextAdvantage;
        nextValue = t.value;
      }
      for (let i = 0; i < steps.length; i++) {
        const t = steps[i];
        obs.push(t.obs);
        actions.push(t.action);
        logProbs.push(t.logProb);
        advantages.push(adv[i]);
        returns.push(adv[i] + t.value);
      }
    }
    return {
      obs,
      actions,
      logProbs: Float32Array.from(logProbs),
      advantages: Float32Array.from(advantages),
      returns: Float32Array.from(returns),
    };
  }

  clear(): void {
    this.perEnv = Array.from({ length: this.nEnvs }, () => []);
  }
}

export interface UpdateStats {
  policyLoss: number;
  valueLoss: number;
  entropy: number;
  approxKl: number;
}

export interface PpoHyper {
  clipRatio: number;
  valueCoef: number;
  entropyCoef: number;
  nEpochs: number;
  minibatchSize: number;
}

/** One PPO update over the batch; returns averaged diagnostics. */
export function ppoUpdate(
  model: ActorCritic,
  optimizer: tf.Optimizer,
  batch: RolloutBatch,
  hyper: PpoHyper,
  rand: () => number
): UpdateStats {
  const n = batch.obs.length;
  // Normalize advantages over the whole batch.
  let mean = 0;
  for (let i = 0; i < n; i++) mean += batch.advantages[i];
  mean /= n;
  let varSum = 0;
  for (let i = 0; i < n; i++) varSum += (batch.advantages[i] - mean) ** 2;
  const std = Math.sqrt(varSum / n) + 1e-8;
  const normAdv = new Float32Array(n);
  for (let i = 0; i < n; i++) normAdv[i] = (batch.advantages[i] - mean) / std;

  const indices = Array.from({ length: n }, (_, i) => i);
  const stats = { policyLoss: 0, valueLoss: 0, entropy: 0, approxKl: 0 };
  let nSteps = 0;
  const varList = model.trainableVariables();

  for (let epoch = 0; epoch < hyper.nEpochs; epoch++) {
    // Fisher-Yates with the run's PRNG keeps updates reproducible.
    for (let i = n - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [indices[i], indices[j]] = [indices[j], indices[i]];
    }
    for (let start = 0; start < n; start += hyper.minibatchSize) {
      const idx = indices.slice(start, start + hyper.minibatchSize);
      if (idx.length < 2) continue;
      const mbObs = idx.map((i) => batch.obs[i]);
      const mbActions = idx.map((i) => batch.actions[i]);
      const mbOldLogProb = tf.tensor1d(idx.map((i) => batch.logProbs[i]));
      const mbAdv = tf.tensor1d(idx.map((i) => normAdv[i]));
      const mbReturns = tf.tensor1d(idx.map((i) => batch.returns[i]));
      const x = model.toInput(mbObs);

      let diag: Float32Array | null = null;
      const loss = optimizer.minimize(
        () => {
          const { logProb, entropy, value } = model.evaluateActions(x, mbActions);
          const ratio = tf.exp(tf.sub(logProb, mbOldLogProb));
          const clipped = tf.clipByValue(ratio, 1 - hyper.clipRatio, 1 + hyper.clipRatio);
          const surrogate = tf.minimum(tf.mul(ratio, mbAdv), tf.mul(clipped, mbAdv));
          const policyLoss = tf.neg(tf.mean(surrogate));
          const valueLoss = tf.mean(tf.square(tf.sub(value, mbReturns)));
          const entropyMean = tf.mean(entropy);
          const kl = tf.mean(tf.sub(mbOldLogProb, logProb));
          diag = tf
            .stack([policyLoss, valueLoss, entropyMean, kl])
            .dataSync() as Float32Array;
          return tf.add(
            tf.sub(policyLoss, tf.mul(tf.scalar(hyper.entropyCoef), entropyMean)),
            tf.mul(tf.scalar(hyper.valueCoef), valueLoss)
          ) as tf.Scalar;
        },
        false,
        varList
      );
      loss?.dispose();
      mbOldLogProb.dispose();
      mbAdv.dispose();
      mbReturns.dispose();
      x.dispose();
      if (diag) {
        stats.policyLoss += diag[0];
        stats.valueLoss += diag[1];
        stats.entropy += diag[2];
        stats.approxKl += diag[3];
        nSteps += 1;
      }
    }
  }
  return {
    policyLoss: stats.policyLoss / nSteps,
    valueLoss: stats.valueLoss / nSteps,
    entropy: stats.entropy / nSteps,
    approxKl: stats.approxKl / nSteps,
  };
}
