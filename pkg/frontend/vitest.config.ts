import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // the round-trip suite trains models through a real service process
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
