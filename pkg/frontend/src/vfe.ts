/**
 * Visual front-end: an all-3D-convolution residual network over grayscale
 * clips (B, 1, T, H, W) -> per-frame features (B, T, C).
 *
 * Structure: one input Conv3D stem lifting the channel count and halving
 * H and W, four residual stages whose first basic block halves H and W again
 * and lifts channels, and a final spatial average pool.  Every convolution
 * has temporal stride 1, so the frame count is preserved end to end.
 * Spatial halving floors (minimum 1), so a 112-pixel input runs
 * 56 -> 28 -> 14 -> 7 -> 3 across the stages.
 */

import { Rng } from "./rng.js";
import { add, batchNorm, conv3d, relu, spatialMeanToFeatures, Tensor } from "./tensor.js";

export interface VfeConfig {
  blockCounts: [number, number, number, number];
  channels: [number, number, number, number];
  inputKernel: [number, number, number];
  /** Spatial size the model accepts; temporal length is free. */
  inputSize: number;
}

export const DEFAULT_CONFIG: VfeConfig = {
  blockCounts: [3, 4, 6, 3],
  channels: [32, 54, 128, 256],
  inputKernel: [5, 7, 7],
  inputSize: 112,
};

/** Alternative preset with the conventional power-of-two channel ladder. */
export const POW2_CONFIG: VfeConfig = {
  ...DEFAULT_CONFIG,
  channels: [32, 64, 128, 256],
};

export function validateConfig(config: VfeConfig): void {
  if (config.blockCounts.length !== 4 || config.channels.length !== 4) {
    throw new Error("config needs exactly 4 stages");
  }
  if (config.blockCounts.some((n) => n < 1)) throw new Error("every stage needs >= 1 block");
  for (let i = 1; i < 4; i++) {
    if (config.channels[i] <= config.channels[i - 1]) {
      throw new Error(`channels must be strictly increasing, got [${config.channels}]`);
    }
  }
  if (config.inputKernel.some((k) => k % 2 === 0)) {
    throw new Error("kernels must be odd so same-padding is symmetric");
  }
}

interface ConvBn {
  weight: Tensor;
  bias: Tensor;
  gamma: Tensor;
  beta: Tensor;
}

interface BasicBlock {
  conv1: ConvBn;
  conv2: ConvBn;
  /** 1x1x1 projection; present only in the first block of a stage. */
  down: ConvBn | null;
}

export class Vfe {
  readonly config: VfeConfig;
  private stem: ConvBn;
  private stages: BasicBlock[][];

  constructor(config: VfeConfig = DEFAULT_CONFIG, rng: Rng = new Rng(1)) {
    validateConfig(config);
    this.config = config;
    const [kt, kh, kw] = config.inputKernel;
    this.stem = makeConvBn(1, config.channels[0], kt, kh, kw, rng);
    this.stages = [];
    let inC = config.channels[0];
    for (let s = 0; s < 4; s++) {
      const outC = config.channels[s];
      const blocks: BasicBlock[] = [];
      for (let b = 0; b < config.blockCounts[s]; b++) {
        const first = b === 0;
        blocks.push({
          conv1: makeConvBn(first ? inC : outC, outC, 3, 3, 3, rng),
          conv2: makeConvBn(outC, outC, 3, 3, 3, rng),
          // Spatial halving always changes shape, so the first block of
          // every stage projects its shortcut.
          down: first ? makeConvBn(inC, outC, 1, 1, 1, rng) : null,
        });
      }
      this.stages.push(blocks);
      inC = outC;
    }
  }

  parameters(): Tensor[] {
    const out: Tensor[] = [];
    const push = (cb: ConvBn) => out.push(cb.weight, cb.bias, cb.gamma, cb.beta);
    push(this.stem);
    for (const stage of this.stages) {
      for (const block of stage) {
        push(block.conv1);
        push(block.conv2);
        if (block.down) push(block.down);
      }
    }
    return out;
  }

  parameterCount(): number {
    return this.parameters().reduce((acc, p) => acc + p.size, 0);
  }

  forward(clips: Tensor): Tensor {
    const [, channels, , h, w] = clips.shape;
    if (clips.shape.length !== 5 || channels !== 1) {
      throw new Error(`expected (B, 1, T, H, W), got [${clips.shape}]`);
    }
    if (h !== this.config.inputSize || w !== this.config.inputSize) {
      throw new Error(
        `expected ${this.config.inputSize}x${this.config.inputSize} frames, got ${h}x${w}`
      );
    }
    let x = convBnRelu(clips, this.stem, 2);
    for (const stage of this.stages) {
      for (let b = 0; b < stage.length; b++) {
        x = basicBlockForward(x, stage[b], b === 0 ? 2 : 1);
      }
    }
    return spatialMeanToFeatures(x);
  }
}

function makeConvBn(
  inC: number,
  outC: number,
  kt: number,
  kh: number,
  kw: number,
  rng: Rng
): ConvBn {
  const fanIn = inC * kt * kh * kw;
  const weight = Tensor.randn([outC, inC, kt, kh, kw], rng, Math.sqrt(2 / fanIn), true);
  const bias = Tensor.zeros([outC], true);
  const gamma = Tensor.zeros([outC], true);
  gamma.data.fill(1);
  const beta = Tensor.zeros([outC], true);
  return { weight, bias, gamma, beta };
}

function convBnRelu(x: Tensor, cb: ConvBn, stride: 1 | 2): Tensor {
  return relu(batchNorm(conv3d(x, cb.weight, cb.bias, stride), cb.gamma, cb.beta));
}

function basicBlockForward(x: Tensor, block: BasicBlock, stride: 1 | 2): Tensor {
  let out = convBnRelu(x, block.conv1, stride);
  out = batchNorm(conv3d(out, block.conv2.weight, block.conv2.bias, 1), block.conv2.gamma, block.conv2.beta);
  const shortcut = block.down
    ? batchNorm(
        conv3d(x, block.down.weight, block.down.bias, stride),
        block.down.gamma,
        block.down.beta
      )
    : x;
  return relu(add(out, shortcut));
}
