import { Tensor } from "../src/tensor.js";

/** Scalarize any tensor with a fixed random projection so ops can be FD-checked. */
export function dotAll(x: Tensor, r: Float64Array): Tensor {
  let acc = 0;
  for (let i = 0; i < x.size; i++) acc += x.data[i] * r[i];
  const out = new Tensor(Float64Array.of(acc), [1]);
  out.requiresGrad = true;
  out.parents = [x];
  out.backfn = () => {
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) gx[i] += out.grad![0] * r[i];
  };
  return out;
}

export interface GradCheckReport {
  maxRelError: number;
  checked: number;
}

/**
 * Central finite differences against the autodiff gradient on a sample of
 * coordinates of `params`.  `forward` must rebuild the loss from scratch.
 */
export function finiteDifferenceCheck(
  params: Tensor[],
  forward: () => Tensor,
  coordinates: Array<[number, number]>,
  epsilon = 1e-5
): GradCheckReport {
  for (const p of params) p.grad = null;
  const loss = forward();
  loss.backward();
  const analytic = coordinates.map(([pi, ci]) => params[pi].grad![ci]);

  let maxRelError = 0;
  coordinates.forEach(([pi, ci], k) => {
    const saved = params[pi].data[ci];
    params[pi].data[ci] = saved + epsilon;
    const plus = forward().item();
    params[pi].data[ci] = saved - epsilon;
    const minus = forward().item();
    params[pi].data[ci] = saved;
    const fd = (plus - minus) / (2 * epsilon);
    const denom = Math.max(Math.abs(fd), Math.abs(analytic[k]), 1e-8);
    maxRelError = Math.max(maxRelError, Math.abs(fd - analytic[k]) / denom);
  });
  return { maxRelError, checked: coordinates.length };
}

/** Deterministic spread of (param, coordinate) pairs across all parameters. */
export function sampleCoordinates(
  params: Tensor[],
  count: number,
  stride = 7919
): Array<[number, number]> {
  const total = params.reduce((acc, p) => acc + p.size, 0);
  const out: Array<[number, number]> = [];
  for (let k = 0; k < count; k++) {
    let flat = (k * stride + 13) % total;
    for (let pi = 0; pi < params.length; pi++) {
      if (flat < params[pi].size) {
        out.push([pi, flat]);
        break;
      }
      flat -= params[pi].size;
    }
  }
  return out;
}
