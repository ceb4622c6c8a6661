import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    // the QA loop test boots the real review service
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
