/** Checkpoint persistence: model weights plus enough metadata to rebuild. */

import * as fs from "fs";
import * as path from "path";
import { ActorCritic, obsDim } from "./model";

export interface Checkpoint {
  version: number;
  variant: string;
  actionComponents: number[];
  observationShape: number[];
  hiddenSizes: number[];
  pairing: string[];
  stepsTrained: number;
  seed: number;
  weights: { shape: number[]; data: number[] }[];
}

export function saveCheckpoint(filePath: string, ckpt: Checkpoint): void {
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  fs.writeFileSync(filePath, JSON.stringify(ckpt));
}

export function loadCheckpoint(filePath: string): Checkpoint {
  const ckpt = JSON.parse(fs.readFileSync(filePath, "utf-8")) as Checkpoint;
  if (!Array.isArray(ckpt.actionComponents) || !Array.isArray(ckpt.weights)) {
    throw new Error(`${filePath} is not a trainer checkpoint`);
  }
  return ckpt;
}

export function modelFromCheckpoint(ckpt: Checkpoint): ActorCritic {
  const [h, w] = ckpt.observationShape;
  const model = new ActorCritic(obsDim(h, w), ckpt.actionComponents, ckpt.hiddenSizes, ckpt.seed);
  model.setWeightArrays(ckpt.weights);
  return model;
}

export function checkpointFromModel(
  model: ActorCritic,
  meta: {
    variant: string;
    observationShape: number[];
    pairing: string[];
    stepsTrained: number;
    seed: number;
  }
): Checkpoint {
  return {
    version: 1,
    variant: meta.variant,
    actionComponents: model.components.slice(),
    observationShape: meta.observationShape.slice(),
    hiddenSizes: model.hiddenSizes.slice(),
    pairing: meta.pairing.slice(),
    stepsTrained: meta.stepsTrained,
    seed: meta.seed,
    weights: model.getWeightArrays(),
  };
}
