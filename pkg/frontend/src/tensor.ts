/**
 * Minimal float64 tensor with reverse-mode autodiff.
 *
 * Every op records its parents and a closure that scatters the incoming
 * gradient; backward() walks the graph in reverse topological order.  All
 * math is double precision, which is what makes the finite-difference
 * gradient checks in the test suite meaningful.
 */

import { Rng } from "./rng.js";

export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null = null;
  requiresGrad: boolean;
  parents: Tensor[] = [];
  backfn: (() => void) | null = null;

  constructor(data: Float64Array, shape: number[], requiresGrad = false) {
    if (data.length !== shape.reduce((a, b) => a * b, 1)) {
      throw new Error(`data length ${data.length} does not match shape [${shape}]`);
    }
    this.data = data;
    this.shape = shape;
    this.requiresGrad = requiresGrad;
  }

  get size(): number {
    return this.data.length;
  }

  static zeros(shape: number[], requiresGrad = false): Tensor {
    return new Tensor(new Float64Array(shape.reduce((a, b) => a * b, 1)), shape, requiresGrad);
  }

  static fromArray(values: number[], shape: number[]): Tensor {
    return new Tensor(Float64Array.from(values), shape);
  }

  static randn(shape: number[], rng: Rng, std = 1, requiresGrad = false): Tensor {
    const t = Tensor.zeros(shape, requiresGrad);
    for (let i = 0; i < t.data.length; i++) t.data[i] = rng.normal() * std;
    return t;
  }

  ensureGrad(): Float64Array {
    if (this.grad === null) this.grad = new Float64Array(this.data.length);
    return this.grad;
  }

  item(): number {
    if (this.size !== 1) throw new Error(`item() on tensor of size ${this.size}`);
    return this.data[0];
  }

  /** Accumulate gradients of this scalar into every requiresGrad ancestor. */
  backward(): void {
    if (this.size !== 1) throw new Error("backward() expects a scalar loss");
    const order: Tensor[] = [];
    const seen = new Set<Tensor>();
    const visit = (t: Tensor) => {
      if (seen.has(t)) return;
      seen.add(t);
      for (const p of t.parents) visit(p);
      order.push(t);
    };
    visit(this);
    this.ensureGrad()[0] = 1;
    for (let i = order.length - 1; i >= 0; i--) {
      const t = order[i];
      if (t.backfn && t.grad) t.backfn();
    }
  }
}

function track(out: Tensor, parents: Tensor[], backfn: () => void): Tensor {
  if (parents.some((p) => p.requiresGrad || p.backfn !== null)) {
    out.requiresGrad = true;
    out.parents = parents;
    out.backfn = backfn;
  }
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.size !== b.size) throw new Error("add: size mismatch");
  const out = Tensor.zeros(a.shape);
  for (let i = 0; i < a.size; i++) out.data[i] = a.data[i] + b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    const ga = a.ensureGrad();
    const gb = b.ensureGrad();
    for (let i = 0; i < g.length; i++) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

export function relu(x: Tensor): Tensor {
  const out = Tensor.zeros(x.shape);
  // Math.max propagates NaN, so divergence stays visible downstream.
  for (let i = 0; i < x.size; i++) out.data[i] = Math.max(x.data[i], 0);
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < g.length; i++) if (x.data[i] > 0) gx[i] += g[i];
  });
}

/** y = a * x + b * scalar-weighted sum used by the joint loss. */
export function affineCombine(x: Tensor, y: Tensor, wx: number, wy: number): Tensor {
  if (x.size !== 1 || y.size !== 1) throw new Error("affineCombine expects scalars");
  const out = new Tensor(Float64Array.of(wx * x.data[0] + wy * y.data[0]), [1]);
  return track(out, [x, y], () => {
    x.ensureGrad()[0] += wx * out.grad![0];
    y.ensureGrad()[0] += wy * out.grad![0];
  });
}

/**
 * 3-D convolution over (B, C, T, H, W).
 *
 * Temporal stride is always 1 with same-length zero padding.  Spatial stride
 * is 1 (same padding) or 2; stride 2 halves each spatial dim by floor with a
 * minimum of 1, sampling windows centered on odd input indices (clamped for
 * dims already at 1).
 */
export function conv3d(x: Tensor, weight: Tensor, bias: Tensor, spatialStride: 1 | 2): Tensor {
  const [batch, inC, inT, inH, inW] = x.shape;
  const [outC, wInC, kT, kH, kW] = weight.shape;
  if (wInC !== inC) throw new Error(`conv3d: ${inC} input channels vs weight ${wInC}`);
  const outT = inT;
  const outH = spatialStride === 1 ? inH : Math.max(1, inH >> 1);
  const outW = spatialStride === 1 ? inW : Math.max(1, inW >> 1);
  const padT = kT >> 1;
  const offH = kH >> 1;
  const offW = kW >> 1;
  const center = (o: number, n: number) => (spatialStride === 1 ? o : Math.min(2 * o + 1, n - 1));

  const out = Tensor.zeros([batch, outC, outT, outH, outW]);
  const xd = x.data;
  const wd = weight.data;
  const od = out.data;
  const planeIn = inH * inW;
  const volIn = inT * planeIn;
  const planeOut = outH * outW;
  const volOut = outT * planeOut;
  const kVol = kT * kH * kW;

  for (let b = 0; b < batch; b++) {
    for (let oc = 0; oc < outC; oc++) {
      const wBase = oc * inC * kVol;
      const oBase = b * outC * volOut + oc * volOut;
      const bv = bias.data[oc];
      for (let ot = 0; ot < outT; ot++) {
        for (let oh = 0; oh < outH; oh++) {
          const hc = center(oh, inH);
          for (let ow = 0; ow < outW; ow++) {
            const wc = center(ow, inW);
            let acc = bv;
            for (let ic = 0; ic < inC; ic++) {
              const xBase = b * inC * volIn + ic * volIn;
              const wcBase = wBase + ic * kVol;
              for (let dt = 0; dt < kT; dt++) {
                const it = ot - padT + dt;
                if (it < 0 || it >= inT) continue;
                for (let dh = 0; dh < kH; dh++) {
                  const ih = hc - offH + dh;
                  if (ih < 0 || ih >= inH) continue;
                  const rowX = xBase + it * planeIn + ih * inW;
                  const rowW = wcBase + dt * kH * kW + dh * kW;
                  for (let dw = 0; dw < kW; dw++) {
                    const iw = wc - offW + dw;
                    if (iw < 0 || iw >= inW) continue;
                    acc += xd[rowX + iw] * wd[rowW + dw];
                  }
                }
              }
            }
            od[oBase + ot * planeOut + oh * outW + ow] = acc;
          }
        }
      }
    }
  }

  return track(out, [x, weight, bias], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    const gw = weight.ensureGrad();
    const gb = bias.ensureGrad();
    for (let b = 0; b < batch; b++) {
      for (let oc = 0; oc < outC; oc++) {
        const wBase = oc * inC * kVol;
        const oBase = b * outC * volOut + oc * volOut;
        for (let ot = 0; ot < outT; ot++) {
          for (let oh = 0; oh < outH; oh++) {
            const hc = center(oh, inH);
            for (let ow = 0; ow < outW; ow++) {
              const wc = center(ow, inW);
              const go = g[oBase + ot * planeOut + oh * outW + ow];
              if (go === 0) continue;
              gb[oc] += go;
              for (let ic = 0; ic < inC; ic++) {
                const xBase = b * inC * volIn + ic * volIn;
                const wcBase = wBase + ic * kVol;
                for (let dt = 0; dt < kT; dt++) {
                  const it = ot - padT + dt;
                  if (it < 0 || it >= inT) continue;
                  for (let dh = 0; dh < kH; dh++) {
                    const ih = hc - offH + dh;
                    if (ih < 0 || ih >= inH) continue;
                    const rowX = xBase + it * planeIn + ih * inW;
                    const rowW = wcBase + dt * kH * kW + dh * kW;
                    for (let dw = 0; dw < kW; dw++) {
                      const iw = wc - offW + dw;
                      if (iw < 0 || iw >= inW) continue;
                      gx[rowX + iw] += go * wd[rowW + dw];
                      gw[rowW + dw] += go * xd[rowX + iw];
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  });
}

/** Batch norm over (B, T, H, W) per channel, training statistics, eps guard. */
export function batchNorm(x: Tensor, gamma: Tensor, beta: Tensor, eps = 1e-5): Tensor {
  const [batch, channels, t, h, w] = x.shape;
  const per = t * h * w;
  const count = batch * per;
  const out = Tensor.zeros(x.shape);
  const mean = new Float64Array(channels);
  const invStd = new Float64Array(channels);
  const xhat = new Float64Array(x.size);

  for (let c = 0; c < channels; c++) {
    let sum = 0;
    for (let b = 0; b < batch; b++) {
      const base = (b * channels + c) * per;
      for (let i = 0; i < per; i++) sum += x.data[base + i];
    }
    const mu = sum / count;
    let varSum = 0;
    for (let b = 0; b < batch; b++) {
      const base = (b * channels + c) * per;
      for (let i = 0; i < per; i++) {
        const d = x.data[base + i] - mu;
        varSum += d * d;
      }
    }
    mean[c] = mu;
    invStd[c] = 1 / Math.sqrt(varSum / count + eps);
    const g = gamma.data[c];
    const bta = beta.data[c];
    for (let b = 0; b < batch; b++) {
      const base = (b * channels + c) * per;
      for (let i = 0; i < per; i++) {
        const xh = (x.data[base + i] - mu) * invStd[c];
        xhat[base + i] = xh;
        out.data[base + i] = g * xh + bta;
      }
    }
  }

  return track(out, [x, gamma, beta], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    const gGamma = gamma.ensureGrad();
    const gBeta = beta.ensureGrad();
    for (let c = 0; c < channels; c++) {
      let sumG = 0;
      let sumGx = 0;
      for (let b = 0; b < batch; b++) {
        const base = (b * channels + c) * per;
        for (let i = 0; i < per; i++) {
          sumG += g[base + i];
          sumGx += g[base + i] * xhat[base + i];
        }
      }
      gGamma[c] += sumGx;
      gBeta[c] += sumG;
      const scale = gamma.data[c] * invStd[c];
      for (let b = 0; b < batch; b++) {
        const base = (b * channels + c) * per;
        for (let i = 0; i < per; i++) {
          gx[base + i] +=
            scale * (g[base + i] - sumG / count - (xhat[base + i] * sumGx) / count);
        }
      }
    }
  });
}

/** Mean over H and W: (B, C, T, H, W) -> (B, T, C). */
export function spatialMeanToFeatures(x: Tensor): Tensor {
  const [batch, channels, t, h, w] = x.shape;
  const plane = h * w;
  const out = Tensor.zeros([batch, t, channels]);
  for (let b = 0; b < batch; b++) {
    for (let c = 0; c < channels; c++) {
      for (let ti = 0; ti < t; ti++) {
        const base = ((b * channels + c) * t + ti) * plane;
        let sum = 0;
        for (let i = 0; i < plane; i++) sum += x.data[base + i];
        out.data[(b * t + ti) * channels + c] = sum / plane;
      }
    }
  }
  return track(out, [x], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    for (let b = 0; b < batch; b++) {
      for (let c = 0; c < channels; c++) {
        for (let ti = 0; ti < t; ti++) {
          const go = g[(b * t + ti) * channels + c] / plane;
          const base = ((b * channels + c) * t + ti) * plane;
          for (let i = 0; i < plane; i++) gx[base + i] += go;
        }
      }
    }
  });
}

/** (B, T, F) x (F, V) + bias -> (B, T, V). */
export function linear(x: Tensor, weight: Tensor, bias: Tensor): Tensor {
  const [fIn, vOut] = weight.shape;
  const rows = x.size / fIn;
  const out = Tensor.zeros([...x.shape.slice(0, -1), vOut]);
  for (let r = 0; r < rows; r++) {
    for (let v = 0; v < vOut; v++) {
      let acc = bias.data[v];
      for (let f = 0; f < fIn; f++) acc += x.data[r * fIn + f] * weight.data[f * vOut + v];
      out.data[r * vOut + v] = acc;
    }
  }
  return track(out, [x, weight, bias], () => {
    const g = out.grad!;
    const gx = x.ensureGrad();
    const gw = weight.ensureGrad();
    const gb = bias.ensureGrad();
    for (let r = 0; r < rows; r++) {
      for (let v = 0; v < vOut; v++) {
        const go = g[r * vOut + v];
        if (go === 0) continue;
        gb[v] += go;
        for (let f = 0; f < fIn; f++) {
          gx[r * fIn + f] += go * weight.data[f * vOut + v];
          gw[f * vOut + v] += go * x.data[r * fIn + f];
        }
      }
    }
  });
}
