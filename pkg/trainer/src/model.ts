/**
 * Actor-critic for the multi-component swap action space.
 *
 * Two separate 3-layer MLPs (sizes from config, default 64-128-64): one as
 * feature extractor under the policy heads, one under the value head. The
 * policy emits independent categorical logits per action component
 * ([h, w, h, w] or [h, w, h, w, 2]); an action's log-probability is the sum
 * over components.
 */

import * as tf from "@tensorflow/tfjs";
import { deriveSeed, mulberry32, sampleIndex } from "./rng";

export const TILE_ID_COUNT = 6; // grass, rock, water, food, spawn1, spawn2

export function obsDim(height: number, width: number): number {
  return height * width * TILE_ID_COUNT;
}

/** One-hot encode an observation grid into a flat feature vector. */
export function flattenObservation(obs: number[][]): Float32Array {
  const h = obs.length;
  const w = obs[0].length;
  const out = new Float32Array(h * w * TILE_ID_COUNT);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      out[(y * w + x) * TILE_ID_COUNT + obs[y][x]] = 1;
    }
  }
  return out;
}

function mlp(
  inputDim: number,
  hidden: number[],
  outUnits: number,
  seed: number,
  outActivation?: "linear"
): tf.Sequential {
  const model = tf.sequential();
  hidden.forEach((units, i) => {
    model.add(
      tf.layers.dense({
        inputShape: i === 0 ? [inputDim] : undefined,
        units,
        activation: "relu",
        kernelInitializer: tf.initializers.glorotUniform({ seed: deriveSeed(seed, i) }),
      })
    );
  });
  model.add(
    tf.layers.dense({
      units: outUnits,
      activation: outActivation ?? "linear",
      kernelInitializer: tf.initializers.glorotUniform({ seed: deriveSeed(seed, 99) }),
    })
  );
  return model;
}

export interface ActionSample {
  actions: number[][];
  logProbs: Float32Array;
  values: Float32Array;
}

export class ActorCritic {
  readonly components: number[];
  readonly inputDim: number;
  readonly hiddenSizes: number[];
  readonly policy: tf.Sequential;
  readonly valueNet: tf.Sequential;
  private readonly totalLogits: number;

  constructor(inputDim: number, components: number[], hiddenSizes: number[], seed = 0) {
    this.inputDim = inputDim;
    this.components = components.slice();
    this.hiddenSizes = hiddenSizes.slice();
    this.totalLogits = components.reduce((a, b) => a + b, 0);
    this.policy = mlp(inputDim, hiddenSizes, this.totalLogits, deriveSeed(seed, 1));
    this.valueNet = mlp(inputDim, hiddenSizes, 1, deriveSeed(seed, 2));
  }

  policyLogits(x: tf.Tensor2D): tf.Tensor2D {
    return this.policy.apply(x) as tf.Tensor2D;
  }

  value(x: tf.Tensor2D): tf.Tensor1D {
    return tf.tidy(() => (this.valueNet.apply(x) as tf.Tensor2D).squeeze([1]));
  }

  /** Sample one action per row; log-probs and values computed alongside. */
  sampleActions(batch: Float32Array[], rand: () => number): ActionSample {
    const n = batch.length;
    const { logitRows, valueArr } = this.forwardArrays(batch);
    const actions: number[][] = [];
    const logProbs = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      const { action, logProb } = this.sampleFromLogits(logitRows[i], rand);
      actions.push(action);
      logProbs[i] = logProb;
    }
    return { actions, logProbs, values: valueArr };
  }

  /** Greedy (argmax per component) actions, for evaluation. */
  greedyActions(batch: Float32Array[]): number[][] {
    const { logitRows } = this.forwardArrays(batch);
    return logitRows.map((row) => {
      const action: number[] = [];
      let off = 0;
      for (const size of this.components) {
        let best = 0;
        for (let j = 1; j < size; j++) if (row[off + j] > row[off + best]) best = j;
        action.push(best);
        off += size;
      }
      return action;
    });
  }

  private forwardArrays(batch: Float32Array[]): { logitRows: Float32Array[]; valueArr: Float32Array } {
    const n = batch.length;
    return tf.tidy(() => {
      const x = this.toInput(batch);
      const logits = this.policyLogits(x);
      const values = this.value(x);
      const flat = logits.dataSync() as Float32Array;
      const logitRows: Float32Array[] = [];
      for (let i = 0; i < n; i++) {
        logitRows.push(flat.subarray(i * this.totalLogits, (i + 1) * this.totalLogits));
      }
      return { logitRows, valueArr: values.dataSync() as Float32Array };
    });
  }

  toInput(batch: Float32Array[]): tf.Tensor2D {
    const n = batch.length;
    const flat = new Float32Array(n * this.inputDim);
    batch.forEach((row, i) => flat.set(row, i * this.inputDim));
    return tf.tensor2d(flat, [n, this.inputDim]);
  }

  private sampleFromLogits(row: Float32Array, rand: () => number): { action: number[]; logProb: number } {
    const action: number[] = [];
    let logProb = 0;
    let off = 0;
    for (const size of this.components) {
      // Stable softmax over this component's logits.
      let maxv = -Infinity;
      for (let j = 0; j < size; j++) if (row[off + j] > maxv) maxv = row[off + j];
      let denom = 0;
      const probs = new Float32Array(size);
      for (let j = 0; j < size; j++) {
        probs[j] = Math.exp(row[off + j] - maxv);
        denom += probs[j];
      }
      for (let j = 0; j < size; j++) probs[j] /= denom;
      const choice = sampleIndex(probs, rand);
      action.push(choice);
      logProb += Math.log(probs[choice] + 1e-12);
      off += size;
    }
    return { action, logProb };
  }

  /**
   * In-graph log-prob / entropy / value of given actions, for the PPO loss.
   * actions is [n, nComponents] of integer choices.
   */
  evaluateActions(
    x: tf.Tensor2D,
    actions: number[][]
  ): { logProb: tf.Tensor1D; entropy: tf.Tensor1D; value: tf.Tensor1D } {
    const logits = this.policyLogits(x);
    const parts = tf.split(logits, this.components, 1);
    let logProb: tf.Tensor1D | null = null;
    let entropy: tf.Tensor1D | null = null;
    this.components.forEach((size, c) => {
      const chosen = tf.tensor1d(actions.map((a) => a[c]), "int32");
      const logSoft = tf.logSoftmax(parts[c]) as tf.Tensor2D;
      const picked = tf.sum(tf.mul(tf.oneHot(chosen, size), logSoft), 1) as tf.Tensor1D;
      const ent = tf.neg(tf.sum(tf.mul(tf.exp(logSoft), logSoft), 1)) as tf.Tensor1D;
      logProb = logProb ? (tf.add(logProb, picked) as tf.Tensor1D) : picked;
      entropy = entropy ? (tf.add(entropy, ent) as tf.Tensor1D) : ent;
    });
    return { logProb: logProb!, entropy: entropy!, value: this.value(x) };
  }

  trainableVariables(): tf.Variable[] {
    // LayerVariable.val is the backing tf.Variable; scoping the optimizer to
    // this list keeps updates isolated if other models live in the process.
    return [...this.policy.trainableWeights, ...this.valueNet.trainableWeights].map(
      (w) => (w as any).val as tf.Variable
    );
  }

  getWeightArrays(): { shape: number[]; data: number[] }[] {
    return [...this.policy.getWeights(), ...this.valueNet.getWeights()].map((t) => ({
      shape: t.shape.slice(),
      data: Array.from(t.dataSync()),
    }));
  }

  setWeightArrays(weights: { shape: number[]; data: number[] }[]): void {
    const nPolicy = this.policy.getWeights().length;
    const tensors = weights.map((w) => tf.tensor(w.data, w.shape));
    this.policy.setWeights(tensors.slice(0, nPolicy));
    this.valueNet.setWeights(tensors.slice(nPolicy));
    tensors.forEach((t) => t.dispose());
  }
}

/** Deterministic uniform-random policy over the same components. */
export function randomActions(components: number[], n: number, rand: () => number): number[][] {
  const out: number[][] = [];
  for (let i = 0; i < n; i++) {
    out.push(components.map((size) => Math.floor(rand() * size) % size));
  }
  return out;
}

export function makeRand(seed: number): () => number {
  return mulberry32(seed);
}
