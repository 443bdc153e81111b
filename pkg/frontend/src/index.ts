/**
 * Bindings over the vippipe command-line interface.
 *
 * Nothing is reimplemented here: datasets are materialized by `vippipe dump`
 * and read back from its VIPC files and items.json sidecar, and metrics are
 * computed by `vippipe eval --metric`. That keeps every number bit-identical
 * to the native pipeline, at the cost of one subprocess per dataset open or
 * metric call.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { ClipArray, decodeClipDump } from "./vipc.js";
import { cliVersion, runCli, runCliJson } from "./runner.js";

export const VERSION = "0.1.0";

export { ClipArray, decodeClipDump } from "./vipc.js";
export { cliVersion } from "./runner.js";

export interface BoxRecord {
  label: number;
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
  track?: number;
}

export interface KeypointRecord {
  x: number;
  y: number;
  visible: boolean;
}

export interface ItemAnnotations {
  item: number;
  video_index: number;
  video: string;
  clip_index: number;
  label: number | null;
  indices: number[];
  boxes: BoxRecord[][];
  keypoints: KeypointRecord[][];
  dropped_boxes: number[][];
}

export interface DatasetItem {
  clip: ClipArray;
  annotations: ItemAnnotations;
}

export type Overrides = Record<string, unknown>;

function overrideArgs(overrides?: Overrides): string[] {
  const args: string[] = [];
  for (const [key, value] of Object.entries(overrides ?? {})) {
    args.push("--set", `${key}=${JSON.stringify(value)}`);
  }
  return args;
}

/**
 * A dataset materialized through the native dump path. Iteration order and
 * content are exactly the CLI's: item i here is item_<i>.vipc there.
 */
export class BoundDataset implements Iterable<DatasetItem> {
  readonly length: number;
  private readonly records: ItemAnnotations[];

  constructor(private readonly dumpDir: string) {
    const sidecar = JSON.parse(fs.readFileSync(path.join(dumpDir, "items.json"), "utf-8"));
    this.records = sidecar.items as ItemAnnotations[];
    this.length = this.records.length;
  }

  item(index: number): DatasetItem {
    if (index < 0 || index >= this.length) {
      throw new RangeError(`item ${index} out of range [0, ${this.length})`);
    }
    const name = `item_${String(index).padStart(6, "0")}.vipc`;
    const clip = decodeClipDump(fs.readFileSync(path.join(this.dumpDir, name)));
    return { clip, annotations: this.records[index] };
  }

  /** Raw dump bytes of one item, for byte-level comparisons. */
  itemBytes(index: number): Buffer {
    const name = `item_${String(index).padStart(6, "0")}.vipc`;
    return fs.readFileSync(path.join(this.dumpDir, name));
  }

  *[Symbol.iterator](): Iterator<DatasetItem> {
    for (let i = 0; i < this.length; i++) {
      yield this.item(i);
    }
  }

  /** Remove the materialized files. The dataset is unusable afterwards. */
  dispose(): void {
    fs.rmSync(this.dumpDir, { recursive: true, force: true });
  }
}

/**
 * Materialize and open a dataset. `overrides` are forwarded to the CLI as
 * `--set key=value` pairs and behave exactly like config-file keys.
 */
export function openDataset(
  manifestPath: string,
  configPath?: string,
  overrides?: Overrides,
): BoundDataset {
  const dumpDir = fs.mkdtempSync(path.join(os.tmpdir(), "vippipe-ds-"));
  const args = ["dump", "--manifest", manifestPath, "--out", dumpDir];
  if (configPath) {
    args.push("--config", configPath);
  }
  args.push(...overrideArgs(overrides));
  try {
    runCliJson<{ items: number }>(args);
  } catch (err) {
    fs.rmSync(dumpDir, { recursive: true, force: true });
    throw err;
  }
  return new BoundDataset(dumpDir);
}

export interface ClipPlanOptions {
  clipLength?: number;
  numClips?: number;
  clipStride?: number;
  clipOffset?: number;
  randomOffset?: boolean;
  mode?: "contiguous" | "uniform";
  seed?: number;
}

export interface VideoPlan {
  video: string;
  clips: number[][];
}

/** Clip plans for every video in a manifest, via `vippipe plan`. */
export function planClips(manifestPath: string, options: ClipPlanOptions = {}): VideoPlan[] {
  const args = ["plan", "--manifest", manifestPath];
  if (options.clipLength !== undefined) args.push("--clip-length", String(options.clipLength));
  if (options.numClips !== undefined) args.push("--num-clips", String(options.numClips));
  if (options.clipStride !== undefined) args.push("--clip-stride", String(options.clipStride));
  if (options.clipOffset !== undefined) args.push("--clip-offset", String(options.clipOffset));
  if (options.randomOffset) args.push("--random-offset");
  if (options.mode) args.push("--mode", options.mode);
  if (options.seed !== undefined) args.push("--seed", String(options.seed));
  return runCliJson<{ plans: VideoPlan[] }>(args).plans;
}

export interface ValidationResult {
  ok: boolean;
  violations: { where: string; message: string }[];
}

/** Schema validation via `vippipe validate` (exit code 1 still carries the report). */
export function validateManifest(manifestPath: string, checkFiles = false): ValidationResult {
  const args = ["validate", manifestPath];
  if (checkFiles) {
    args.push("--check-files");
  }
  return runCliJson<ValidationResult>(args, [0, 1]);
}

export type MetricName = "accuracy" | "iou" | "ap" | "map" | "nss" | "cc";

function metricPayload(name: MetricName, predictions: unknown, groundTruth: unknown): unknown {
  switch (name) {
    case "iou":
      return { box_a: predictions, box_b: groundTruth };
    case "accuracy":
      return { predictions, labels: groundTruth };
    case "ap":
    case "map":
      return { detections: predictions, ground_truth: groundTruth };
    case "nss":
      return { predicted: predictions, fixations: groundTruth };
    case "cc":
      return { predicted: predictions, gt: groundTruth };
  }
}

export interface MetricOptions {
  iouThreshold?: number;
  interpolation?: "eleven" | "all";
  classId?: number;
}

/**
 * Compute one metric with the native implementation. Inputs are plain
 * values: boxes as [xmin, ymin, xmax, ymax] or objects, maps as nested
 * number arrays, detections as {image_id, label, box, confidence} records.
 */
export function computeMetric(
  name: MetricName,
  predictions: unknown,
  groundTruth: unknown,
  options: MetricOptions = {},
): number {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "vippipe-metric-"));
  const predPath = path.join(dir, "pred.json");
  try {
    fs.writeFileSync(predPath, JSON.stringify(metricPayload(name, predictions, groundTruth)));
    const args = ["eval", "--metric", name, "--pred", predPath];
    if (options.iouThreshold !== undefined) args.push("--iou-threshold", String(options.iouThreshold));
    if (options.interpolation) args.push("--interp", options.interpolation);
    if (options.classId !== undefined) args.push("--class-id", String(options.classId));
    return runCliJson<{ value: number }>(args).value;
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

/** Generate a synthetic dataset on disk; returns the manifest path. */
export function generateSyntheticDataset(
  outDir: string,
  opts: { seed?: number; videos?: number; classes?: number; lengthMin?: number; lengthMax?: number; height?: number; width?: number; trainFraction?: number } = {},
): string {
  const args = ["synth", "--out", outDir];
  if (opts.seed !== undefined) args.push("--seed", String(opts.seed));
  if (opts.videos !== undefined) args.push("--videos", String(opts.videos));
  if (opts.classes !== undefined) args.push("--classes", String(opts.classes));
  if (opts.lengthMin !== undefined) args.push("--length-min", String(opts.lengthMin));
  if (opts.lengthMax !== undefined) args.push("--length-max", String(opts.lengthMax));
  if (opts.height !== undefined) args.push("--height", String(opts.height));
  if (opts.width !== undefined) args.push("--width", String(opts.width));
  if (opts.trainFraction !== undefined) args.push("--train-fraction", String(opts.trainFraction));
  return runCliJson<{ manifest: string }>(args).manifest;
}

/** The native CLI must be the same release as these bindings. */
export function assertVersionMatch(): void {
  const native = cliVersion();
  if (native !== VERSION) {
    throw new Error(`bindings ${VERSION} do not match native CLI ${native}`);
  }
}

export { runCli };
