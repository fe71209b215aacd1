/**
 * Policy evaluation against a gateway serving an indexed level pool.
 *
 * Each level gets one episode under the gateway's max_steps budget; levels
 * already balanced at reset are excluded from the denominator. The "random"
 * policy draws uniform actions over the same components, giving the
 * equal-budget baseline a trained policy has to beat.
 *
 * The default "sample" mode rolls out the policy distribution with a seeded
 * PRNG (reproducible given the seed). Argmax ("greedy") is available but is a
 * poor evaluation of weakly-trained policies: a deterministic action on an
 * unchanged level repeats forever, so an untrained network scores far below
 * the random baseline instead of matching it.
 */

import { ActorCritic, flattenObservation, randomActions } from "./model";
import { mulberry32, deriveSeed } from "./rng";
import { GatewayClient } from "./protocol";

export type EvalPolicy = "sample" | "greedy" | "random";

export interface LevelResult {
  index: number;
  levelId?: string;
  initialB: number;
  finalB: number;
  initiallyBalanced: boolean;
  balanced: boolean;
  steps: number;
}

export interface EvalReport {
  policy: EvalPolicy;
  levels: number;
  eligible: number;
  balancedCount: number;
  balancedFraction: number;
  perLevel: LevelResult[];
}

export interface EvalOptions {
  maxLevels: number;
  seed: number;
  policy: EvalPolicy;
  model?: ActorCritic;
}

export async function evaluatePolicy(client: GatewayClient, opts: EvalOptions): Promise<EvalReport> {
  const spec = await client.spec();
  if (spec.dataset_size < 1) {
    throw new Error("gateway has no dataset loaded; serve with --dataset");
  }
  if (opts.policy !== "random" && !opts.model) {
    throw new Error(`${opts.policy} evaluation needs a model`);
  }
  const nLevels = Math.min(opts.maxLevels, spec.dataset_size);
  const rand = mulberry32(deriveSeed(opts.seed, 0xe7a1));
  const perLevel: LevelResult[] = [];

  for (let index = 0; index < nLevels; index++) {
    const reset = await client.reset(0, { index, seed: deriveSeed(opts.seed, index) });
    const initialB = reset.info.b;
    if (reset.info.balanced) {
      perLevel.push({
        index,
        levelId: reset.level_id,
        initialB,
        finalB: initialB,
        initiallyBalanced: true,
        balanced: true,
        steps: 0,
      });
      continue;
    }
    let obs = reset.obs;
    let done = false;
    let steps = 0;
    let finalB = initialB;
    let balanced = false;
    while (!done) {
      let action: number[];
      if (opts.policy === "greedy") {
        action = opts.model!.greedyActions([flattenObservation(obs)])[0];
      } else if (opts.policy === "sample") {
        action = opts.model!.sampleActions([flattenObservation(obs)], rand).actions[0];
      } else {
        action = randomActions(spec.action_components, 1, rand)[0];
      }
      const step = await client.step(0, action);
      obs = step.obs;
      done = step.done;
      steps += 1;
      finalB = step.info.b;
      balanced = step.info.balanced;
    }
    perLevel.push({
      index,
      levelId: reset.level_id,
      initialB,
      finalB,
      initiallyBalanced: false,
      balanced,
      steps,
    });
  }

  const eligible = perLevel.filter((r) => !r.initiallyBalanced);
  const balancedCount = eligible.filter((r) => r.balanced).length;
  return {
    policy: opts.policy,
    levels: perLevel.length,
    eligible: eligible.length,
    balancedCount,
    balancedFraction: eligible.length ? balancedCount / eligible.length : 0,
    perLevel,
  };
}

export function reportCsv(report: EvalReport): string {
  const lines = ["index,level_id,initial_b,final_b,initially_balanced,balanced,steps"];
  for (const r of report.perLevel) {
    lines.push(
      [r.index, r.levelId ?? "", r.initialB, r.finalB, r.initiallyBalanced, r.balanced, r.steps].join(",")
    );
  }
  return lines.join("\n") + "\n";
}
