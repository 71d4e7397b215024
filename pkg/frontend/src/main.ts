/**
 * CLI entry:
 *   node dist/main.js features <clip-dir> <out-dir> [--preset tiny|default|pow2]
 *   node dist/main.js overfit <out-dir> [--steps N] [--ctc-weight W] [--seed S]
 *
 * `features` reads a raw-plane clip produced by the extraction toolkit, runs
 * the front-end, and writes features.npy + metrics.json.  `overfit` runs the
 * memorization harness and writes loss_curve.npy + metrics.json.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { readRawClip, writeJson, writeNpy } from "./io.js";
import { Rng } from "./rng.js";
import { overfitCheck, syntheticBatch, TINY_CONFIG } from "./train.js";
import { DEFAULT_CONFIG, POW2_CONFIG, Vfe, VfeConfig } from "./vfe.js";

/** Shallow front-end sized for CPU demo runs on real 112x112 clips. */
const DEMO_CONFIG: VfeConfig = {
  blockCounts: [1, 1, 1, 1],
  channels: [8, 16, 32, 256],
  inputKernel: [5, 7, 7],
  inputSize: 112,
};

function flag(argv: string[], name: string): string | undefined {
  const i = argv.indexOf(name);
  return i >= 0 && i + 1 < argv.length ? argv[i + 1] : undefined;
}

function pickConfig(name: string | undefined): VfeConfig {
  switch (name ?? "demo") {
    case "demo":
      return DEMO_CONFIG;
    case "tiny":
      return TINY_CONFIG;
    case "default":
      return DEFAULT_CONFIG;
    case "pow2":
      return POW2_CONFIG;
    default:
      throw new Error(`unknown preset ${name}; use demo|tiny|default|pow2`);
  }
}

function runFeatures(argv: string[]): void {
  const [clipDir, outDir] = argv;
  if (!clipDir || !outDir) throw new Error("usage: features <clip-dir> <out-dir> [--preset p]");
  const config = pickConfig(flag(argv, "--preset"));
  const clip = readRawClip(clipDir);
  if (clip.shape[3] !== config.inputSize) {
    throw new Error(
      `clip is ${clip.shape[3]}x${clip.shape[4]} but preset expects ${config.inputSize}`
    );
  }
  const vfe = new Vfe(config, new Rng(parseInt(flag(argv, "--seed") ?? "1", 10)));
  const started = Date.now();
  const features = vfe.forward(clip);
  fs.mkdirSync(outDir, { recursive: true });
  writeNpy(path.join(outDir, "features.npy"), features.data, features.shape);
  writeJson(path.join(outDir, "metrics.json"), {
    kind: "features",
    clip: clipDir,
    feature_shape: features.shape,
    frames: clip.shape[2],
    parameter_count: vfe.parameterCount(),
    elapsed_ms: Date.now() - started,
  });
  console.log(`features ${features.shape.join("x")} -> ${outDir}`);
}

function runOverfit(argv: string[]): void {
  const [outDir] = argv;
  if (!outDir) throw new Error("usage: overfit <out-dir> [--steps N] [--ctc-weight W]");
  const steps = parseInt(flag(argv, "--steps") ?? "200", 10);
  const ctcWeight = parseFloat(flag(argv, "--ctc-weight") ?? "0.3");
  const seed = parseInt(flag(argv, "--seed") ?? "7", 10);

  const batch = syntheticBatch(new Rng(seed + 1), TINY_CONFIG);
  const targets = [
    [1, 2, 3],
    [3, 2],
  ];
  const started = Date.now();
  const result = overfitCheck(batch, targets, { steps, ctcWeight, seed });
  fs.mkdirSync(outDir, { recursive: true });
  writeNpy(path.join(outDir, "loss_curve.npy"), Float64Array.from(result.curve), [
    result.curve.length,
  ]);
  writeJson(path.join(outDir, "metrics.json"), {
    kind: "overfit",
    steps,
    ctc_weight: ctcWeight,
    initial_loss: result.curve[0],
    final_loss: result.curve[result.curve.length - 1],
    halved: result.halved,
    elapsed_ms: Date.now() - started,
  });
  console.log(
    `overfit: ${result.curve[0].toFixed(4)} -> ${result.curve[result.curve.length - 1].toFixed(4)}` +
      ` over ${steps} steps (halved=${result.halved})`
  );
}

const [, , command, ...rest] = process.argv;
try {
  if (command === "features") runFeatures(rest);
  else if (command === "overfit") runOverfit(rest);
  else {
    console.error("usage: main.js <features|overfit> ...");
    process.exit(1);
  }
} catch (err) {
  console.error(String(err instanceof Error ? err.message : err));
  process.exit(1);
}
