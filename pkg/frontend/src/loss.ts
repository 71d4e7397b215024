/**
 * Joint training objective: a convex blend of the CTC loss on the encoder
 * output and the cross-entropy loss on the decoder output,
 * weight * ctc + (1 - weight) * attention.
 */

import { ctcLoss } from "./ctc.js";
import { affineCombine, Tensor } from "./tensor.js";

export class LossWeights {
  readonly ctcWeight: number;

  constructor(ctcWeight = 0.3) {
    if (!(ctcWeight >= 0 && ctcWeight <= 1)) {
      throw new Error(`ctcWeight must be in [0, 1], got ${ctcWeight}`);
    }
    this.ctcWeight = ctcWeight;
  }
}

/** Pure combination rule, exposed for direct numeric tests. */
export function combineLosses(ctc: number, attention: number, ctcWeight: number): number {
  return ctcWeight * ctc + (1 - ctcWeight) * attention;
}

/** Softmax cross entropy on (B, U, V) logits vs integer targets, mean over tokens. */
export function crossEntropyLoss(logits: Tensor, targets: number[][]): Tensor {
  const [batch, maxLen, vocab] = logits.shape;
  let count = 0;
  let total = 0;
  const softmaxCache = new Float64Array(logits.size);
  for (let b = 0; b < batch; b++) {
    const target = targets[b];
    if (target.length > maxLen) {
      throw new Error(`target length ${target.length} exceeds decoder length ${maxLen}`);
    }
    for (let u = 0; u < target.length; u++) {
      const base = (b * maxLen + u) * vocab;
      let max = -Infinity;
      for (let v = 0; v < vocab; v++) max = Math.max(max, logits.data[base + v]);
      let sum = 0;
      for (let v = 0; v < vocab; v++) sum += Math.exp(logits.data[base + v] - max);
      const logZ = max + Math.log(sum);
      for (let v = 0; v < vocab; v++) {
        softmaxCache[base + v] = Math.exp(logits.data[base + v] - logZ);
      }
      total += logZ - logits.data[base + target[u]];
      count++;
    }
  }
  if (count === 0) throw new Error("cross entropy needs at least one target token");

  const out = new Tensor(Float64Array.of(total / count), [1]);
  if (logits.requiresGrad || logits.backfn !== null) {
    out.requiresGrad = true;
    out.parents = [logits];
    out.backfn = () => {
      const go = out.grad![0] / count;
      const gl = logits.ensureGrad();
      for (let b = 0; b < batch; b++) {
        const target = targets[b];
        for (let u = 0; u < target.length; u++) {
          const base = (b * maxLen + u) * vocab;
          for (let v = 0; v < vocab; v++) {
            gl[base + v] += go * (softmaxCache[base + v] - (v === target[u] ? 1 : 0));
          }
        }
      }
    };
  }
  return out;
}

/**
 * weight.ctcWeight * CTC(encoderLogits, targets)
 *   + (1 - weight.ctcWeight) * CE(decoderLogits, targets).
 */
export function jointLoss(
  encoderLogits: Tensor,
  decoderLogits: Tensor,
  targets: number[][],
  weights: LossWeights
): Tensor {
  const ctc = ctcLoss(encoderLogits, targets);
  const attention = crossEntropyLoss(decoderLogits, targets);
  return affineCombine(ctc, attention, weights.ctcWeight, 1 - weights.ctcWeight);
}
