/**
 * Sanity harness: a tiny recognizer (VFE + linear CTC head + positional
 * decoder head) that must be able to memorize a 2-clip batch.  If the joint
 * loss cannot be driven down on this, something in the forward or backward
 * pass is broken.
 */

import { jointLoss, LossWeights } from "./loss.js";
import { Rng } from "./rng.js";
import { linear, Tensor } from "./tensor.js";
import { Vfe, VfeConfig } from "./vfe.js";

export class DivergenceError extends Error {
  constructor(public step: number) {
    super(`loss became non-finite at step ${step}`);
  }
}

export class Adam {
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;

  constructor(
    private params: Tensor[],
    private lr = 1e-3,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8
  ) {
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  step(): void {
    this.t++;
    const correct1 = 1 - Math.pow(this.beta1, this.t);
    const correct2 = 1 - Math.pow(this.beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const p = this.params[k];
      if (!p.grad) continue;
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < p.size; i++) {
        const g = p.grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        p.data[i] -= (this.lr * (m[i] / correct1)) / (Math.sqrt(v[i] / correct2) + this.eps);
      }
    }
  }

  zeroGrad(): void {
    for (const p of this.params) if (p.grad) p.grad.fill(0);
  }
}

/** Config small enough that 200 training steps stay in CPU budget. */
export const TINY_CONFIG: VfeConfig = {
  blockCounts: [1, 1, 1, 1],
  channels: [2, 3, 4, 6],
  inputKernel: [3, 5, 5],
  inputSize: 28,
};

export class TinyRecognizer {
  readonly vfe: Vfe;
  private encW: Tensor;
  private encB: Tensor;
  private decW: Tensor;
  private decB: Tensor;
  private posBias: Tensor;
  readonly vocab: number;
  readonly maxTargetLen: number;

  constructor(config: VfeConfig, vocab: number, maxTargetLen: number, rng: Rng) {
    this.vfe = new Vfe(config, rng);
    this.vocab = vocab;
    this.maxTargetLen = maxTargetLen;
    const c = config.channels[3];
    this.encW = Tensor.randn([c, vocab], rng, Math.sqrt(1 / c), true);
    this.encB = Tensor.zeros([vocab], true);
    this.decW = Tensor.randn([c, vocab], rng, Math.sqrt(1 / c), true);
    this.decB = Tensor.zeros([vocab], true);
    this.posBias = Tensor.randn([maxTargetLen, vocab], rng, 0.01, true);
  }

  parameters(): Tensor[] {
    return [...this.vfe.parameters(), this.encW, this.encB, this.decW, this.decB, this.posBias];
  }

  /** (encoderLogits (B,T,V), decoderLogits (B,U,V)). */
  forward(clips: Tensor): { encoder: Tensor; decoder: Tensor } {
    const features = this.vfe.forward(clips); // (B, T, C)
    const encoder = linear(features, this.encW, this.encB);
    const pooled = meanOverTime(features); // (B, C)
    const perClip = linear(pooled, this.decW, this.decB); // (B, V)
    const decoder = broadcastWithPositions(perClip, this.posBias, this.maxTargetLen);
    return { encoder, decoder };
  }
}

function meanOverTime(features: Tensor): Tensor {
  const [batch, t, c] = features.shape;
  const out = Tensor.zeros([batch, c]);
  for (let b = 0; b < batch; b++) {
    for (let k = 0; k < c; k++) {
      let sum = 0;
      for (let ti = 0; ti < t; ti++) sum += features.data[(b * t + ti) * c + k];
      out.data[b * c + k] = sum / t;
    }
  }
  if (features.requiresGrad || features.backfn !== null) {
    out.requiresGrad = true;
    out.parents = [features];
    out.backfn = () => {
      const g = out.grad!;
      const gf = features.ensureGrad();
      for (let b = 0; b < batch; b++) {
        for (let k = 0; k < c; k++) {
          const go = g[b * c + k] / t;
          for (let ti = 0; ti < t; ti++) gf[(b * t + ti) * c + k] += go;
        }
      }
    };
  }
  return out;
}

/** decoder[b, u, v] = perClip[b, v] + posBias[u, v]. */
function broadcastWithPositions(perClip: Tensor, posBias: Tensor, maxLen: number): Tensor {
  const [batch, vocab] = perClip.shape;
  const out = Tensor.zeros([batch, maxLen, vocab]);
  for (let b = 0; b < batch; b++) {
    for (let u = 0; u < maxLen; u++) {
      for (let v = 0; v < vocab; v++) {
        out.data[(b * maxLen + u) * vocab + v] =
          perClip.data[b * vocab + v] + posBias.data[u * vocab + v];
      }
    }
  }
  out.requiresGrad = true;
  out.parents = [perClip, posBias];
  out.backfn = () => {
    const g = out.grad!;
    const gp = perClip.ensureGrad();
    const gb = posBias.ensureGrad();
    for (let b = 0; b < batch; b++) {
      for (let u = 0; u < maxLen; u++) {
        for (let v = 0; v < vocab; v++) {
          const go = g[(b * maxLen + u) * vocab + v];
          gp[b * vocab + v] += go;
          gb[u * vocab + v] += go;
        }
      }
    }
  };
  return out;
}

export interface OverfitOptions {
  steps?: number;
  learningRate?: number;
  ctcWeight?: number;
  seed?: number;
  config?: VfeConfig;
}

export interface OverfitResult {
  curve: number[];
  halved: boolean;
}

export function syntheticBatch(rng: Rng, config: VfeConfig, clips = 2, frames = 6): Tensor {
  const s = config.inputSize;
  const x = Tensor.zeros([clips, 1, frames, s, s]);
  for (let i = 0; i < x.size; i++) x.data[i] = rng.next();
  return x;
}

/**
 * Train the tiny recognizer on one fixed batch and record the loss curve.
 * curve[0] is the pre-update loss; one entry follows per step.  Throws
 * DivergenceError (with the step index) if the loss leaves the reals.
 */
export function overfitCheck(
  batch: Tensor,
  targets: number[][],
  options: OverfitOptions = {}
): OverfitResult {
  const steps = options.steps ?? 200;
  const config = options.config ?? TINY_CONFIG;
  const weights = new LossWeights(options.ctcWeight ?? 0.3);
  const rng = new Rng(options.seed ?? 7);
  if (batch.shape[0] > 4) throw new Error("tiny batch means at most 4 clips");
  if (targets.some((t) => t.length > 10)) throw new Error("targets capped at 10 tokens");

  const vocab = Math.max(...targets.flat()) + 1;
  const maxLen = Math.max(...targets.map((t) => t.length));
  const model = new TinyRecognizer(config, vocab, maxLen, rng);
  const optimizer = new Adam(model.parameters(), options.learningRate ?? 1e-3);

  const evalLoss = (updateGrad: boolean): number => {
    optimizer.zeroGrad();
    const { encoder, decoder } = model.forward(batch);
    const loss = jointLoss(encoder, decoder, targets, weights);
    if (updateGrad) loss.backward();
    return loss.item();
  };

  const curve: number[] = [];
  for (let step = 0; step <= steps; step++) {
    const needGrad = step < steps;
    const loss = evalLoss(needGrad);
    if (!Number.isFinite(loss)) throw new DivergenceError(step);
    curve.push(loss);
    if (needGrad) optimizer.step();
  }
  return { curve, halved: curve[curve.length - 1] < 0.5 * curve[0] };
}
