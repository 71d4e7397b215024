/**
 * Release gate for the reference front-end: shape contract, loss-blend
 * algebra, gradient agreement with finite differences, and the overfit
 * sanity harness.  The whole file must finish well inside a 5-minute CPU
 * budget.
 */

import { describe, expect, it } from "vitest";

import { jointLoss, LossWeights } from "../src/loss.js";
import { Rng } from "../src/rng.js";
import { linear, Tensor } from "../src/tensor.js";
import { overfitCheck, syntheticBatch, TINY_CONFIG } from "../src/train.js";
import { DEFAULT_CONFIG, Vfe, VfeConfig } from "../src/vfe.js";
import { finiteDifferenceCheck, sampleCoordinates } from "./helpers.js";

/** Full-resolution front-end thinned to one block per stage for CPU runs. */
const SHAPE_CONFIG: VfeConfig = {
  blockCounts: [1, 1, 1, 1],
  channels: [8, 16, 32, 256],
  inputKernel: [5, 7, 7],
  inputSize: 112,
};

describe("shape contract", () => {
  const vfe = new Vfe(SHAPE_CONFIG, new Rng(1));

  for (const b of [1, 2]) {
    for (const t of [1, 5, 25]) {
      it(`B=${b}, T=${t} maps to (${b}, ${t}, 256)`, () => {
        const clips = Tensor.randn([b, 1, t, 112, 112], new Rng(10 * b + t), 0.5);
        const out = vfe.forward(clips);
        expect(out.shape).toEqual([b, t, 256]);
        expect(Array.from(out.data).every(Number.isFinite)).toBe(true);
      });
    }
  }

  it("paper-default preset (channels 32/54/128/256, blocks 3/4/6/3) honors the contract", () => {
    const full = new Vfe(DEFAULT_CONFIG, new Rng(2));
    const out = full.forward(Tensor.randn([1, 1, 1, 112, 112], new Rng(3), 0.5));
    expect(out.shape).toEqual([1, 1, 256]);
  });
});

function toyModel() {
  // ~1e3 trainable parameters: two linear heads over fixed random features.
  const rng = new Rng(51);
  const featDim = 40;
  const vocab = 12;
  const encoderIn = Tensor.randn([2, 8, featDim], rng, 0.8);
  const decoderIn = Tensor.randn([2, 3, featDim], rng, 0.8);
  const targets = [
    [1, 2, 3],
    [4, 5],
  ];
  const encW = Tensor.randn([featDim, vocab], rng, 0.3, true);
  const encB = Tensor.randn([vocab], rng, 0.1, true);
  const decW = Tensor.randn([featDim, vocab], rng, 0.3, true);
  const decB = Tensor.randn([vocab], rng, 0.1, true);
  const params = [encW, encB, decW, decB];
  const forward = (weight: number) =>
    jointLoss(
      linear(encoderIn, encW, encB),
      linear(decoderIn, decW, decB),
      targets,
      new LossWeights(weight)
    );
  return { params, forward };
}

describe("joint loss algebra", () => {
  it("endpoint identities: weight 1 is CTC, weight 0 is attention CE", () => {
    const { forward } = toyModel();
    const ctcOnly = forward(1.0).item();
    const ceOnly = forward(0.0).item();
    expect(ctcOnly).not.toBeCloseTo(ceOnly, 3); // distinct terms, meaningful blend
    expect(forward(1.0).item()).toBeCloseTo(ctcOnly, 12);
    expect(forward(0.0).item()).toBeCloseTo(ceOnly, 12);
  });

  it("is affine in the blend weight to 1e-6 relative", () => {
    const { forward } = toyModel();
    const atOne = forward(1.0).item();
    const atZero = forward(0.0).item();
    for (const w of [0.05, 0.3, 0.5, 0.66, 0.95]) {
      const got = forward(w).item();
      const want = w * atOne + (1 - w) * atZero;
      expect(Math.abs(got - want) / Math.max(Math.abs(want), 1e-12)).toBeLessThan(1e-6);
    }
  });
});

describe("gradient agreement", () => {
  it("matches central finite differences within 1e-4 on 20 coordinates", () => {
    const { params, forward } = toyModel();
    const total = params.reduce((acc, p) => acc + p.size, 0);
    expect(total).toBeGreaterThan(900); // the promised ~1e3-parameter model
    expect(total).toBeLessThan(1200);
    const report = finiteDifferenceCheck(
      params,
      () => forward(0.3),
      sampleCoordinates(params, 20)
    );
    expect(report.checked).toBe(20);
    expect(report.maxRelError).toBeLessThan(1e-4);
  });

  it("also holds through the convolutional front-end", () => {
    const rng = new Rng(61);
    const config: VfeConfig = {
      blockCounts: [1, 1, 1, 1],
      channels: [2, 3, 4, 5],
      inputKernel: [3, 3, 3],
      inputSize: 8,
    };
    const vfe = new Vfe(config, rng);
    const headW = Tensor.randn([5, 4], rng, 0.4, true);
    const headB = Tensor.randn([4], rng, 0.1, true);
    const clips = Tensor.randn([2, 1, 3, 8, 8], rng, 0.5);
    const targets = [[1], [2, 3]];
    const params = [...vfe.parameters(), headW, headB];
    const forward = () =>
      jointLoss(
        linear(vfe.forward(clips), headW, headB),
        linear(vfe.forward(clips), headW, headB),
        targets,
        new LossWeights(0.3)
      );
    const report = finiteDifferenceCheck(params, forward, sampleCoordinates(params, 20));
    expect(report.maxRelError).toBeLessThan(1e-4);
  });
});

describe("overfit harness", () => {
  const targets = [
    [1, 2, 3],
    [3, 2],
  ];

  it("halves the loss within 200 steps on a 2-clip synthetic batch", () => {
    const batch = syntheticBatch(new Rng(8), TINY_CONFIG);
    const result = overfitCheck(batch, targets, { steps: 200, ctcWeight: 0.3 });
    expect(result.curve).toHaveLength(201);
    expect(result.halved).toBe(true);
    expect(result.curve[200]).toBeLessThan(0.5 * result.curve[0]);
  });

  it("converges at both blend endpoints on the same data", () => {
    const batch = syntheticBatch(new Rng(8), TINY_CONFIG);
    for (const w of [1.0, 0.3]) {
      const result = overfitCheck(batch, targets, { steps: 200, ctcWeight: w });
      expect(result.halved).toBe(true);
    }
  });
});
