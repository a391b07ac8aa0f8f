import { defineConfig } from "vite";

export default defineConfig({
  build: {
    target: "es2020",
  },
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
  },
} as never);
