#!/usr/bin/env node
/**
 * NDJSON protocol server over stdio or TCP.
 *
 * Usage:
 *   ra-ner-adapter --echo [--tcp PORT] [--max-subword-len N] [--batch-size N]
 *   ra-ner-adapter --model PATH ...
 *
 * Malformed lines get an error response and never kill the process; a model
 * that fails to load exits nonzero before the first ping is answered.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import { Writable } from "node:stream";

import { AdapterConfig, DEFAULT_CONFIG, PieceClassifier, loadModel } from "./model.js";
import { Response, parseLine, salvageId } from "./protocol.js";
import { handleRequest } from "./tagging.js";

export function parseArgs(argv: string[]): AdapterConfig & { tcpPort: number | null } {
  const config = { ...DEFAULT_CONFIG, tcpPort: null as number | null };
  let sawMode = false;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${arg} needs a value`);
      return argv[++i];
    };
    switch (arg) {
      case "--echo":
        config.model = "";
        sawMode = true;
        break;
      case "--model":
        config.model = next();
        sawMode = true;
        break;
      case "--tcp":
        config.tcpPort = Number.parseInt(next(), 10);
        break;
      case "--max-subword-len":
        config.maxSubwordLen = Number.parseInt(next(), 10);
        break;
      case "--batch-size":
        config.batchSize = Number.parseInt(next(), 10);
        break;
      case "--device":
        config.device = next();
        break;
      default:
        throw new Error(`unknown flag ${arg}`);
    }
  }
  if (!sawMode) throw new Error("one of --echo or --model is required");
  return config;
}

function respond(out: Writable, response: Response): void {
  out.write(JSON.stringify(response) + "\n");
}

export function handleLine(
  model: PieceClassifier,
  maxSubwordLen: number,
  line: string,
  out: Writable,
): void {
  if (line.trim() === "") return;
  let parsed;
  try {
    parsed = parseLine(line);
  } catch (err) {
    respond(out, { id: salvageId(line), error: String((err as Error).message) });
    return;
  }
  if ("op" in parsed) {
    respond(out, { op: "pong" });
    return;
  }
  try {
    respond(out, handleRequest(model, maxSubwordLen, parsed));
  } catch (err) {
    respond(out, { id: parsed.id, error: String((err as Error).message) });
  }
}

function serveStream(
  model: PieceClassifier,
  maxSubwordLen: number,
  input: NodeJS.ReadableStream,
  out: Writable,
): void {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  rl.on("line", (line) => handleLine(model, maxSubwordLen, line, out));
}

export function main(argv: string[]): number {
  let config;
  let model: PieceClassifier;
  try {
    config = parseArgs(argv);
    model = loadModel(config);
  } catch (err) {
    process.stderr.write(`ra-ner-adapter: error: ${(err as Error).message}\n`);
    return 1;
  }
  if (config.tcpPort !== null) {
    const server = net.createServer((socket) => {
      serveStream(model, config.maxSubwordLen, socket, socket);
      socket.on("error", () => socket.destroy());
    });
    server.listen(config.tcpPort, "127.0.0.1", () => {
      const addr = server.address() as net.AddressInfo;
      process.stderr.write(`listening on tcp:127.0.0.1:${addr.port}\n`);
    });
  } else {
    serveStream(model, config.maxSubwordLen, process.stdin, process.stdout);
  }
  return 0;
}

const isDirectRun =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  const code = main(process.argv.slice(2));
  if (code !== 0) process.exit(code);
}
