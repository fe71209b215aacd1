/**
 * Vectorized PPO training against one gateway session.
 *
 * The session multiplexes nEnvs env slots; requests for all slots are
 * pipelined per step so the gateway (which evaluates level balance per step)
 * stays busy. Episodes auto-reset with dataset draws seeded per
 * (run seed, slot, episode counter), so runs replay deterministically against
 * the same gateway configuration.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { Checkpoint, checkpointFromModel, saveCheckpoint } from "./checkpoint";
import { TrainConfig, validateConfig } from "./config";
import { ActorCritic, flattenObservation, obsDim } from "./model";
import { ppoUpdate, RolloutBuffer } from "./ppo";
import { GatewayClient, parseEndpoint } from "./protocol";
import { deriveSeed, mulberry32 } from "./rng";

export interface TrainResult {
  checkpointPath: string;
  metricsPath: string;
  stepsTrained: number;
  updates: number;
  meanReturnFirst: number;
  meanReturnLast: number;
}

interface SlotState {
  obs: Float32Array;
  episodeReturn: number;
  episodeCounter: number;
}

export async function train(
  cfg: TrainConfig,
  variant: string,
  resumeFrom?: Checkpoint,
  log: (msg: string) => void = console.log
): Promise<TrainResult> {
  validateConfig(cfg);
  const { host, port } = parseEndpoint(cfg.gateway);
  const client = await GatewayClient.connect(host, port);
  try {
    return await trainWithClient(client, cfg, variant, resumeFrom, log);
  } finally {
    await client.close();
  }
}

export async function trainWithClient(
  client: GatewayClient,
  cfg: TrainConfig,
  variant: string,
  resumeFrom: Checkpoint | undefined,
  log: (msg: string) => void
): Promise<TrainResult> {
  const spec = await client.spec();
  if (spec.variant !== variant) {
    throw new Error(`gateway serves variant '${spec.variant}' but config wants '${variant}'`);
  }
  if (spec.dataset_size < 1) {
    throw new Error("gateway has no dataset to draw training levels from");
  }
  const [h, w] = spec.observation_shape;
  const inputDim = obsDim(h, w);

  let model: ActorCritic;
  let stepsTrained = 0;
  if (resumeFrom) {
    const same =
      JSON.stringify(resumeFrom.actionComponents) === JSON.stringify(spec.action_components);
    if (!same) {
      throw new Error(
        `checkpoint components [${resumeFrom.actionComponents}] do not match gateway [${spec.action_components}]`
      );
    }
    model = new ActorCritic(inputDim, resumeFrom.actionComponents, resumeFrom.hiddenSizes, cfg.seed);
    model.setWeightArrays(resumeFrom.weights);
    stepsTrained = resumeFrom.stepsTrained;
    log(`resumed from checkpoint at ${stepsTrained} steps`);
  } else {
    model = new ActorCritic(inputDim, spec.action_components, cfg.hiddenSizes, cfg.seed);
  }

  const optimizer = tf.train.adam(cfg.learningRate);
  const sampleRand = mulberry32(deriveSeed(cfg.seed, 0x5a3f));
  const shuffleRand = mulberry32(deriveSeed(cfg.seed, 0x11bb));

  // Reset all slots (pipelined).
  const slots: SlotState[] = [];
  const resets = await Promise.all(
    Array.from({ length: cfg.nEnvs }, (_, e) =>
      client.reset(e, { seed: deriveSeed(cfg.seed, e * 1_000_003) })
    )
  );
  resets.forEach((r) => slots.push({ obs: flattenObservation(r.obs), episodeReturn: 0, episodeCounter: 0 }));

  fs.mkdirSync(cfg.outDir, { recursive: true });
  const metricsPath = path.join(cfg.outDir, "metrics.csv");
  const checkpointPath = path.join(cfg.outDir, "checkpoint.json");
  fs.writeFileSync(
    metricsPath,
    "update,env_steps,episodes,mean_episode_return,policy_loss,value_loss,entropy,approx_kl,elapsed_s\n"
  );

  const totalUpdates = Math.floor(cfg.totalSteps / (cfg.nEnvs * cfg.rolloutLen));
  const buffer = new RolloutBuffer(cfg.nEnvs);
  const returnsPerUpdate: number[] = [];
  const started = Date.now();

  for (let update = 1; update <= totalUpdates; update++) {
    const episodeReturns: number[] = [];
    for (let t = 0; t < cfg.rolloutLen; t++) {
      const batchObs = slots.map((s) => s.obs);
      const { actions, logProbs, values } = model.sampleActions(batchObs, sampleRand);
      const replies = await Promise.all(
        actions.map((action, e) => client.step(e, action))
      );
      const resetsNeeded: number[] = [];
      replies.forEach((reply, e) => {
        buffer.add(e, {
          obs: slots[e].obs,
          action: actions[e],
          reward: reply.reward,
          done: reply.done,
          value: values[e],
          logProb: logProbs[e],
        });
        slots[e].episodeReturn += reply.reward;
        if (reply.done) {
          episodeReturns.push(slots[e].episodeReturn);
          slots[e].episodeReturn = 0;
          slots[e].episodeCounter += 1;
          resetsNeeded.push(e);
        } else {
          slots[e].obs = flattenObservation(reply.obs);
        }
      });
      if (resetsNeeded.length) {
        const fresh = await Promise.all(
          resetsNeeded.map((e) =>
            client.reset(e, {
              seed: deriveSeed(cfg.seed, e * 1_000_003 + slots[e].episodeCounter),
            })
          )
        );
        fresh.forEach((r, i) => {
          slots[resetsNeeded[i]].obs = flattenObservation(r.obs);
        });
      }
    }
    stepsTrained += cfg.nEnvs * cfg.rolloutLen;

    // Bootstrap truncated tails with the value of the current observation.
    const lastValues = tf.tidy(() => {
      const x = model.toInput(slots.map((s) => s.obs));
      return model.value(x).dataSync() as Float32Array;
    });
    const batch = buffer.finish(lastValues, cfg.gamma, cfg.lambda);
    buffer.clear();
    const stats = ppoUpdate(model, optimizer, batch, cfg, shuffleRand);

    const meanReturn = episodeReturns.length
      ? episodeReturns.reduce((a, b) => a + b, 0) / episodeReturns.length
      : 0;
    returnsPerUpdate.push(meanReturn);
    const elapsed = (Date.now() - started) / 1000;
    fs.appendFileSync(
      metricsPath,
      [
        update,
        stepsTrained,
        episodeReturns.length,
        meanReturn.toFixed(6),
        stats.policyLoss.toFixed(6),
        stats.valueLoss.toFixed(6),
        stats.entropy.toFixed(6),
        stats.approxKl.toFixed(6),
        elapsed.toFixed(1),
      ].join(",") + "\n"
    );
    log(
      `update ${update}/${totalUpdates} steps=${stepsTrained} episodes=${episodeReturns.length} ` +
        `meanReturn=${meanReturn.toFixed(4)} pi=${stats.policyLoss.toFixed(4)} ` +
        `vf=${stats.valueLoss.toFixed(4)} ent=${stats.entropy.toFixed(3)} [${elapsed.toFixed(0)}s]`
    );

    if (update % 10 === 0 || update === totalUpdates) {
      saveCheckpoint(
        checkpointPath,
        checkpointFromModel(model, {
          variant,
          observationShape: spec.observation_shape,
          pairing: spec.pairing,
          stepsTrained,
          seed: cfg.seed,
        })
      );
    }
  }

  const tithe = Math.max(1, Math.floor(returnsPerUpdate.length / 10));
  const meanOf = (xs: number[]) => (xs.length ? xs.reduce((a, b) => a + b, 0) / xs.length : 0);
  return {
    checkpointPath,
    metricsPath,
    stepsTrained,
    updates: totalUpdates,
    meanReturnFirst: meanOf(returnsPerUpdate.slice(0, tithe)),
    meanReturnLast: meanOf(returnsPerUpdate.slice(-tithe)),
  };
}
