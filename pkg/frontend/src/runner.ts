/** Thin wrapper around the `vippipe` executable. */

import { spawnSync } from "node:child_process";

export interface RunResult {
  status: number;
  stdout: string;
  stderr: string;
}

const CLI = process.env.VIPPIPE_BIN ?? "vippipe";

export function runCli(args: string[], okStatuses: number[] = [0]): RunResult {
  const proc = spawnSync(CLI, args, { encoding: "utf-8", maxBuffer: 256 * 1024 * 1024 });
  if (proc.error) {
    throw new Error(`failed to launch ${CLI}: ${proc.error.message}`);
  }
  const status = proc.status ?? -1;
  if (!okStatuses.includes(status)) {
    const detail = (proc.stderr || proc.stdout || "").trim();
    throw new Error(detail || `${CLI} ${args.join(" ")} exited with status ${status}`);
  }
  return { status, stdout: proc.stdout, stderr: proc.stderr };
}

export function runCliJson<T>(args: string[], okStatuses: number[] = [0]): T {
  const result = runCli([...args, "--json"], okStatuses);
  return JSON.parse(result.stdout) as T;
}

export function cliVersion(): string {
  return runCli(["--version"]).stdout.trim();
}
