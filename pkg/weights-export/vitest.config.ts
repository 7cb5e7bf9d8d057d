import { defineConfig } from "vitest/config";

// Full-size checkpoint fixtures (~80 MB of tensors) take a while to build
// and parse on small CI machines; the default 5 s per-test budget is far
// too tight for them.
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
