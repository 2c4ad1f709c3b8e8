#!/usr/bin/env node
/**
 * Plugin entry point.
 *
 *     node dist/main.js                # reference scorers
 *     node dist/main.js --mode echo    # protocol-test echo plugin
 *
 * Wire into the pipeline config as, e.g.:
 *
 *     scorers:
 *       aesthetic: {kind: external, command: "node plugins/dist/main.js", timeout: 30}
 */

import { echoHandler } from "./echo.js";
import { referenceHandler } from "./handlers.js";
import { serve } from "./protocol.js";

function parseMode(argv: string[]): string {
  const i = argv.indexOf("--mode");
  if (i >= 0 && i + 1 < argv.length) return argv[i + 1];
  return "reference";
}

const mode = parseMode(process.argv.slice(2));
const handler = mode === "echo" ? echoHandler : referenceHandler;

serve(handler)
  .then(() => process.exit(0))
  .catch((err) => {
    process.stderr.write(`fatal: ${err}\n`);
    process.exit(1);
  });
