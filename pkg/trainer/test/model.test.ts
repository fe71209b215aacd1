import { describe, expect, it } from "vitest";
import * as tf from "@tensorflow/tfjs";
import { checkpointFromModel, modelFromCheckpoint } from "../src/checkpoint";
import { ActorCritic, flattenObservation, obsDim, randomActions } from "../src/model";
import { mulberry32 } from "../src/rng";

const COMPONENTS = [6, 6, 6, 6];

function randomObs(rand: () => number): Float32Array {
  const grid: number[][] = [];
  for (let y = 0; y < 6; y++) {
    grid.push(Array.from({ length: 6 }, () => Math.floor(rand() * 4)));
  }
  grid[0][0] = 4;
  grid[5][5] = 5;
  return flattenObservation(grid);
}

describe("flattenObservation", () => {
  it("one-hot encodes ids", () => {
    const grid = [
      [0, 1],
      [4, 5],
    ];
    const flat = flattenObservation(grid);
    expect(flat.length).toBe(2 * 2 * 6);
    expect(Array.from(flat.slice(0, 6))).toEqual([1, 0, 0, 0, 0, 0]);
    expect(Array.from(flat.slice(6, 12))).toEqual([0, 1, 0, 0, 0, 0]);
    expect(Array.from(flat.slice(12, 18))).toEqual([0, 0, 0, 0, 1, 0]);
    expect(Array.from(flat.slice(18, 24))).toEqual([0, 0, 0, 0, 0, 1]);
    // every cell contributes exactly one hot entry
    expect(flat.reduce((a, b) => a + b, 0)).toBe(4);
  });
});

describe("ActorCritic", () => {
  it("samples in-range actions deterministically given a seed", () => {
    const model = new ActorCritic(obsDim(6, 6), COMPONENTS, [16, 16], 3);
    const obs = [randomObs(mulberry32(1)), randomObs(mulberry32(2))];
    const a = model.sampleActions(obs, mulberry32(7));
    const b = model.sampleActions(obs, mulberry32(7));
    expect(a.actions).toEqual(b.actions);
    expect(Array.from(a.logProbs)).toEqual(Array.from(b.logProbs));
    for (const action of a.actions) {
      expect(action.length).toBe(4);
      action.forEach((v, i) => {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThan(COMPONENTS[i]);
      });
    }
  });

  it("legacy component layout adds the flag head", () => {
    const model = new ActorCritic(obsDim(6, 6), [6, 6, 6, 6, 2], [16, 16], 3);
    const sample = model.sampleActions([randomObs(mulberry32(5))], mulberry32(1));
    expect(sample.actions[0].length).toBe(5);
    expect(sample.actions[0][4]).toBeLessThan(2);
  });

  it("in-graph log-probs agree with sampling-time log-probs", () => {
    const model = new ActorCritic(obsDim(6, 6), COMPONENTS, [16, 16], 9);
    const obs = Array.from({ length: 5 }, (_, i) => randomObs(mulberry32(i)));
    const sample = model.sampleActions(obs, mulberry32(11));
    const x = model.toInput(obs);
    const { logProb } = model.evaluateActions(x, sample.actions);
    const graph = logProb.dataSync();
    for (let i = 0; i < obs.length; i++) {
      expect(graph[i]).toBeCloseTo(sample.logProbs[i], 4);
    }
    x.dispose();
  });

  it("greedy actions pick per-component argmax and stay deterministic", () => {
    const model = new ActorCritic(obsDim(6, 6), COMPONENTS, [16, 16], 4);
    const obs = [randomObs(mulberry32(42))];
    expect(model.greedyActions(obs)). toEqual(model.greedyActions(obs));
  });
});

describe("checkpoints", () => {
  it("round-trips weights and reproduces behaviour exactly", () => {
    const model = new ActorCritic(obsDim(6, 6), COMPONENTS, [16, 16], 21);
    const ckpt = checkpointFromModel(model, {
      variant: "wide",
      observationShape: [6, 6],
      pairing: ["A", "A"],
      stepsTrained: 123,
      seed: 21,
    });
    const clone = modelFromCheckpoint(JSON.parse(JSON.stringify(ckpt)));
    const obs = Array.from({ length: 4 }, (_, i) => randomObs(mulberry32(100 + i)));
    expect(clone.greedyActions(obs)).toEqual(model.greedyActions(obs));
    const x1 = model.toInput(obs);
    const x2 = clone.toInput(obs);
    const v1 = model.value(x1).dataSync();
    const v2 = clone.value(x2).dataSync();
    expect(Array.from(v2)).toEqual(Array.from(v1));
    x1.dispose();
    x2.dispose();
  });
});

describe("randomActions", () => {
  it("covers the component ranges uniformly-ish", () => {
    const actions = randomActions(COMPONENTS, 500, mulberry32(3));
    const seen = new Set(actions.map((a) => a.join(",")));
    expect(seen.size).toBeGreaterThan(300);
    for (const a of actions) {
      a.forEach((v, i) => {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThan(COMPONENTS[i]);
      });
    }
  });
});
