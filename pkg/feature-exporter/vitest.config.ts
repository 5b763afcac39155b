import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    testTimeout: 60000,
    hookTimeout: 60000,
    // keep the acceptance PASS/FAIL line visible in the run log
    disableConsoleIntercept: true,
  },
})
