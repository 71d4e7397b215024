/**
 * CTC loss (blank index 0) on logits of shape (B, T, V), computed in log
 * space with the standard forward recursion over the blank-interleaved label
 * sequence.  The analytic gradient comes from the alpha-beta posteriors and
 * plugs into the autodiff graph as a custom op, so the whole joint loss is
 * differentiable end to end.
 */

import { Tensor } from "./tensor.js";

export class CtcFeasibilityError extends Error {}

const NEG_INF = -Infinity;

function logAdd(a: number, b: number): number {
  if (a === NEG_INF) return b;
  if (b === NEG_INF) return a;
  return a > b ? a + Math.log1p(Math.exp(b - a)) : b + Math.log1p(Math.exp(a - b));
}

function requiredLength(target: number[]): number {
  let repeats = 0;
  for (let i = 1; i < target.length; i++) if (target[i] === target[i - 1]) repeats++;
  return target.length + repeats;
}

/** -log p(target | logits) for one sequence, plus d(loss)/d(logits). */
function ctcSingle(
  logits: Float64Array,
  timeSteps: number,
  vocab: number,
  target: number[]
): { loss: number; grad: Float64Array } {
  if (timeSteps < requiredLength(target)) {
    throw new CtcFeasibilityError(
      `target needs at least ${requiredLength(target)} frames, encoder gives ${timeSteps}`
    );
  }
  for (const label of target) {
    if (label <= 0 || label >= vocab) {
      throw new CtcFeasibilityError(`label ${label} outside (0, ${vocab}) with blank=0`);
    }
  }

  // Log-softmax per frame.
  const logProbs = new Float64Array(timeSteps * vocab);
  for (let t = 0; t < timeSteps; t++) {
    let max = -Infinity;
    for (let v = 0; v < vocab; v++) max = Math.max(max, logits[t * vocab + v]);
    let sum = 0;
    for (let v = 0; v < vocab; v++) sum += Math.exp(logits[t * vocab + v] - max);
    const logZ = max + Math.log(sum);
    for (let v = 0; v < vocab; v++) logProbs[t * vocab + v] = logits[t * vocab + v] - logZ;
  }

  // Blank-interleaved extended labels: @ l1 @ l2 ... @.
  const ext: number[] = [0];
  for (const label of target) {
    ext.push(label, 0);
  }
  const s = ext.length;

  const alpha = new Float64Array(timeSteps * s).fill(NEG_INF);
  alpha[0] = logProbs[ext[0]];
  if (s > 1) alpha[1] = logProbs[ext[1]];
  for (let t = 1; t < timeSteps; t++) {
    for (let k = 0; k < s; k++) {
      let acc = alpha[(t - 1) * s + k];
      if (k > 0) acc = logAdd(acc, alpha[(t - 1) * s + k - 1]);
      if (k > 1 && ext[k] !== 0 && ext[k] !== ext[k - 2]) {
        acc = logAdd(acc, alpha[(t - 1) * s + k - 2]);
      }
      alpha[t * s + k] = acc === NEG_INF ? NEG_INF : acc + logProbs[t * vocab + ext[k]];
    }
  }
  let logP = alpha[(timeSteps - 1) * s + s - 1];
  if (s > 1) logP = logAdd(logP, alpha[(timeSteps - 1) * s + s - 2]);

  const beta = new Float64Array(timeSteps * s).fill(NEG_INF);
  beta[(timeSteps - 1) * s + s - 1] = logProbs[(timeSteps - 1) * vocab + ext[s - 1]];
  if (s > 1) beta[(timeSteps - 1) * s + s - 2] = logProbs[(timeSteps - 1) * vocab + ext[s - 2]];
  for (let t = timeSteps - 2; t >= 0; t--) {
    for (let k = s - 1; k >= 0; k--) {
      let acc = beta[(t + 1) * s + k];
      if (k < s - 1) acc = logAdd(acc, beta[(t + 1) * s + k + 1]);
      if (k < s - 2 && ext[k] !== 0 && ext[k] !== ext[k + 2]) {
        acc = logAdd(acc, beta[(t + 1) * s + k + 2]);
      }
      beta[t * s + k] = acc === NEG_INF ? NEG_INF : acc + logProbs[t * vocab + ext[k]];
    }
  }

  // d(-logP)/d(logit[t,v]) = softmax[t,v] - sum_{k: ext[k]=v} gammaHat[t,k],
  // with gammaHat the posterior occupancy normalized per frame.
  const grad = new Float64Array(timeSteps * vocab);
  for (let t = 0; t < timeSteps; t++) {
    const occupancy = new Float64Array(vocab).fill(NEG_INF);
    for (let k = 0; k < s; k++) {
      const ab = alpha[t * s + k] + beta[t * s + k] - logProbs[t * vocab + ext[k]];
      occupancy[ext[k]] = logAdd(occupancy[ext[k]], ab);
    }
    for (let v = 0; v < vocab; v++) {
      const posterior = occupancy[v] === NEG_INF ? 0 : Math.exp(occupancy[v] - logP);
      grad[t * vocab + v] = Math.exp(logProbs[t * vocab + v]) - posterior;
    }
  }
  return { loss: -logP, grad };
}

/** Mean CTC loss over the batch; targets are label lists (blank 0 excluded). */
export function ctcLoss(logits: Tensor, targets: number[][]): Tensor {
  const [batch, timeSteps, vocab] = logits.shape;
  if (targets.length !== batch) {
    throw new CtcFeasibilityError(`${targets.length} targets for batch of ${batch}`);
  }
  const per = timeSteps * vocab;
  const grads: Float64Array[] = [];
  let total = 0;
  for (let b = 0; b < batch; b++) {
    const { loss, grad } = ctcSingle(
      logits.data.subarray(b * per, (b + 1) * per) as Float64Array,
      timeSteps,
      vocab,
      targets[b]
    );
    total += loss;
    grads.push(grad);
  }
  const out = new Tensor(Float64Array.of(total / batch), [1]);
  if (logits.requiresGrad || logits.backfn !== null) {
    out.requiresGrad = true;
    out.parents = [logits];
    out.backfn = () => {
      const go = out.grad![0] / batch;
      const gl = logits.ensureGrad();
      for (let b = 0; b < batch; b++) {
        const g = grads[b];
        for (let i = 0; i < per; i++) gl[b * per + i] += go * g[i];
      }
    };
  }
  return out;
}

/** Independent of the gradient path: total path probability by enumeration. */
export function bruteForceCtcNegLogProb(
  logits: Float64Array,
  timeSteps: number,
  vocab: number,
  target: number[]
): number {
  const logProbs = new Float64Array(timeSteps * vocab);
  for (let t = 0; t < timeSteps; t++) {
    let max = -Infinity;
    for (let v = 0; v < vocab; v++) max = Math.max(max, logits[t * vocab + v]);
    let sum = 0;
    for (let v = 0; v < vocab; v++) sum += Math.exp(logits[t * vocab + v] - max);
    for (let v = 0; v < vocab; v++) {
      logProbs[t * vocab + v] = logits[t * vocab + v] - max - Math.log(sum);
    }
  }

  const collapse = (path: number[]): number[] => {
    const out: number[] = [];
    let prev = -1;
    for (const v of path) {
      if (v !== prev && v !== 0) out.push(v);
      prev = v;
    }
    return out;
  };

  let total = NEG_INF;
  const path = new Array<number>(timeSteps);
  const walk = (t: number, acc: number) => {
    if (t === timeSteps) {
      const collapsed = collapse(path);
      if (collapsed.length === target.length && collapsed.every((v, i) => v === target[i])) {
        total = logAdd(total, acc);
      }
      return;
    }
    for (let v = 0; v < vocab; v++) {
      path[t] = v;
      walk(t + 1, acc + logProbs[t * vocab + v]);
    }
  };
  walk(0, 0);
  return -total;
}
