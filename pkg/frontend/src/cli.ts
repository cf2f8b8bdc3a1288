/**
 * Subprocess bridge to the `lpcorrupt` command line.
 *
 * All sampling happens in the Python package; this module only invokes its
 * CLI and parses the JSON it emits. Shortest round-trip float formatting on
 * the Python side plus IEEE-exact JSON parsing here means every float64
 * crosses the boundary bit-exactly.
 */

import { execFileSync } from "node:child_process";

export interface CliOptions {
  /** Executable name or path; defaults to $LPC_CLI or "lpcorrupt". */
  cli?: string;
}

export function cliExecutable(options?: CliOptions): string {
  return options?.cli ?? process.env.LPC_CLI ?? "lpcorrupt";
}

export function runCli(args: string[], options?: CliOptions): string {
  return execFileSync(cliExecutable(options), args, {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
    stdio: ["ignore", "pipe", "pipe"],
  });
}

export function runCliJson<T>(args: string[], options?: CliOptions): T {
  return JSON.parse(runCli([...args, "--json"], options)) as T;
}
