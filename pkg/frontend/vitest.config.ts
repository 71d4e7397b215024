import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // Full-resolution forwards and 200-step training runs take tens of
    // seconds on CPU; the whole suite still fits the 5-minute budget.
    testTimeout: 240_000,
  },
});
