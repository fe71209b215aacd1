/**
 * Trainer CLI.
 *
 *   node dist/cli.js train --gateway 127.0.0.1:7850 --steps 200000 --envs 8 \
 *       --rollout 512 --out-dir checkpoints
 *   node dist/cli.js eval --ckpt checkpoints/checkpoint.json \
 *       --gateway 127.0.0.1:7851 --levels 100 --compare-random
 */

import * as fs from "fs";
import * as path from "path";
import { loadCheckpoint, modelFromCheckpoint } from "./checkpoint";
import { DEFAULT_TRAIN_CONFIG, TrainConfig } from "./config";
import { evaluatePolicy, reportCsv } from "./evaluate";
import { GatewayClient, parseEndpoint } from "./protocol";
import { train } from "./train";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument '${arg}'`);
    const key = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      out.set(key, argv[++i]);
    } else {
      out.set(key, "true");
    }
  }
  return out;
}

function numArg(args: Map<string, string>, key: string, fallback: number): number {
  const raw = args.get(key);
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new Error(`--${key} wants a number, got '${raw}'`);
  return value;
}

async function cmdTrain(args: Map<string, string>): Promise<number> {
  const defaults = DEFAULT_TRAIN_CONFIG;
  const cfg: TrainConfig = {
    gateway: args.get("gateway") ?? defaults.gateway,
    totalSteps: numArg(args, "steps", defaults.totalSteps),
    nEnvs: numArg(args, "envs", defaults.nEnvs),
    rolloutLen: numArg(args, "rollout", defaults.rolloutLen),
    hiddenSizes: (args.get("hidden") ?? defaults.hiddenSizes.join(","))
      .split(",")
      .map((s) => Number(s)),
    gamma: numArg(args, "gamma", defaults.gamma),
    lambda: numArg(args, "lambda", defaults.lambda),
    clipRatio: numArg(args, "clip", defaults.clipRatio),
    learningRate: numArg(args, "lr", defaults.learningRate),
    valueCoef: numArg(args, "value-coef", defaults.valueCoef),
    entropyCoef: numArg(args, "entropy-coef", defaults.entropyCoef),
    nEpochs: numArg(args, "epochs", defaults.nEpochs),
    minibatchSize: numArg(args, "minibatch", defaults.minibatchSize),
    seed: numArg(args, "seed", defaults.seed),
    outDir: args.get("out-dir") ?? defaults.outDir,
    evalEvery: numArg(args, "eval-every", defaults.evalEvery),
  };
  const variant = args.get("variant") ?? "wide";
  const resume = args.get("resume") ? loadCheckpoint(args.get("resume")!) : undefined;
  const result = await train(cfg, variant, resume);
  console.log(
    `trained ${result.stepsTrained} steps over ${result.updates} updates; ` +
      `mean return first-10% ${result.meanReturnFirst.toFixed(4)} -> last-10% ${result.meanReturnLast.toFixed(4)}`
  );
  console.log(`checkpoint: ${result.checkpointPath}`);
  console.log(`metrics: ${result.metricsPath}`);
  return 0;
}

async function cmdEval(args: Map<string, string>): Promise<number> {
  const ckptPath = args.get("ckpt");
  if (!ckptPath) throw new Error("eval needs --ckpt");
  const gatewayArg = args.get("gateway") ?? DEFAULT_TRAIN_CONFIG.gateway;
  const { host, port } = parseEndpoint(gatewayArg);
  const ckpt = loadCheckpoint(ckptPath);
  const client = await GatewayClient.connect(host, port);
  try {
    const spec = await client.spec();
    if (spec.variant !== ckpt.variant) {
      throw new Error(
        `checkpoint was trained for variant '${ckpt.variant}' but gateway serves '${spec.variant}'`
      );
    }
    const model = modelFromCheckpoint(ckpt);
    const levels = numArg(args, "levels", 100);
    const seed = numArg(args, "seed", 0);
    const mode = (args.get("mode") ?? "sample") as "sample" | "greedy";
    if (mode !== "sample" && mode !== "greedy") throw new Error("--mode wants sample|greedy");
    const greedy = await evaluatePolicy(client, { maxLevels: levels, seed, policy: mode, model });
    console.log(
      `${mode}: balanced ${greedy.balancedCount}/${greedy.eligible} = ${greedy.balancedFraction.toFixed(3)} ` +
        `(${greedy.levels - greedy.eligible} initially balanced, excluded)`
    );
    if (args.get("out")) {
      fs.mkdirSync(path.dirname(args.get("out")!) || ".", { recursive: true });
      fs.writeFileSync(args.get("out")!, reportCsv(greedy));
    }
    if (args.get("compare-random")) {
      const random = await evaluatePolicy(client, { maxLevels: levels, seed, policy: "random" });
      console.log(
        `random: balanced ${random.balancedCount}/${random.eligible} = ${random.balancedFraction.toFixed(3)}`
      );
      console.log(
        greedy.balancedFraction > random.balancedFraction
          ? `${mode} policy beats the random baseline`
          : `${mode} policy does NOT beat the random baseline`
      );
    }
    return 0;
  } finally {
    await client.close();
  }
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    const args = parseArgs(rest);
    if (command === "train") return await cmdTrain(args);
    if (command === "eval") return await cmdEval(args);
    console.error("usage: cli.js <train|eval> [--flags]");
    return 1;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
