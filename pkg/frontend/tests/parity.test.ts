import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import {
  BoundDataset,
  assertVersionMatch,
  generateSyntheticDataset,
  openDataset,
  planClips,
  runCli,
  validateManifest,
} from "../src/index.js";

const tmpRoots: string[] = [];

function tmpDir(prefix: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), prefix));
  tmpRoots.push(dir);
  return dir;
}

afterAll(() => {
  for (const dir of tmpRoots) {
    fs.rmSync(dir, { recursive: true, force: true });
  }
});

function writeConfig(dir: string, extra: Record<string, unknown> = {}): string {
  const config = {
    clip_length: 5,
    num_clips: -1,
    resize_shape: [20, 20],
    crop_shape: [16, 16],
    crop_type: "Random",
    final_shape: [16, 16],
    flip_probability: 0.5,
    labels: 3,
    num_workers: 2,
    ...extra,
  };
  const p = path.join(dir, "config.yaml");
  fs.writeFileSync(
    p,
    Object.entries(config)
      .map(([k, v]) => `${k}: ${JSON.stringify(v)}`)
      .join("\n") + "\n",
  );
  return p;
}

function makeDataset(seed: number): { manifest: string; config: string } {
  const dir = tmpDir(`parity-${seed}-`);
  const manifest = generateSyntheticDataset(path.join(dir, "data"), {
    seed,
    videos: 4,
    classes: 3,
    lengthMin: 8,
    lengthMax: 12,
    height: 24,
    width: 24,
    trainFraction: 1.0,
  });
  return { manifest, config: writeConfig(dir, { seed }) };
}

describe("dataset parity with the native dump", () => {
  it.each([3, 11, 42])("matches clip bytes and annotations for seed %i", (seed) => {
    const { manifest, config } = makeDataset(seed);
    const dataset = openDataset(manifest, config);
    try {
      const nativeOut = tmpDir(`native-${seed}-`);
      runCli(["dump", "--manifest", manifest, "--config", config, "--out", nativeOut, "--json"]);
      const native = JSON.parse(fs.readFileSync(path.join(nativeOut, "items.json"), "utf-8"));
      expect(dataset.length).toBe(native.items.length);
      expect(dataset.length).toBeGreaterThan(0);
      for (let i = 0; i < dataset.length; i++) {
        const nativeBytes = fs.readFileSync(
          path.join(nativeOut, `item_${String(i).padStart(6, "0")}.vipc`),
        );
        expect(dataset.itemBytes(i).equals(nativeBytes)).toBe(true);
        expect(dataset.item(i).annotations).toEqual(native.items[i]);
      }
    } finally {
      dataset.dispose();
    }
  });

  it("exposes clips as typed arrays of the dumped shape", () => {
    const { manifest, config } = makeDataset(5);
    const dataset = openDataset(manifest, config);
    try {
      const { clip, annotations } = dataset.item(0);
      expect(clip.dtype).toBe("uint8");
      expect([clip.length, clip.height, clip.width, clip.channels]).toEqual([5, 16, 16, 3]);
      expect(clip.data.length).toBe(5 * 16 * 16 * 3);
      expect(annotations.indices).toEqual([0, 1, 2, 3, 4]);
      expect(annotations.boxes).toHaveLength(5);
    } finally {
      dataset.dispose();
    }
  });

  it("length equals the native plan's clip count", () => {
    const { manifest, config } = makeDataset(9);
    const dataset = openDataset(manifest, config);
    try {
      const plans = planClips(manifest, { clipLength: 5, numClips: -1 });
      const planned = plans.reduce((acc, p) => acc + p.clips.length, 0);
      expect(dataset.length).toBe(planned);
    } finally {
      dataset.dispose();
    }
  });

  it("two iterations over one dataset are identical", () => {
    const { manifest, config } = makeDataset(13);
    const dataset = openDataset(manifest, config);
    try {
      const first = [...dataset].map((item) => Buffer.from(item.clip.data.slice().buffer));
      const second = [...dataset].map((item) => Buffer.from(item.clip.data.slice().buffer));
      expect(first.length).toBe(second.length);
      first.forEach((bytes, i) => expect(bytes.equals(second[i])).toBe(true));
    } finally {
      dataset.dispose();
    }
  });

  it("overrides behave like config keys", () => {
    const { manifest, config } = makeDataset(17);
    const dataset = openDataset(manifest, config, { clip_length: 3, crop_type: "Center" });
    try {
      expect(dataset.item(0).clip.length).toBe(3);
    } finally {
      dataset.dispose();
    }
  });

  it("float32 clips survive the dump boundary", () => {
    const { manifest, config } = makeDataset(21);
    const dataset = openDataset(manifest, config, { subtract_mean: [100.0, 110.0, 120.0] });
    try {
      const { clip } = dataset.item(0);
      expect(clip.dtype).toBe("float32");
      expect(clip.data).toBeInstanceOf(Float32Array);
    } finally {
      dataset.dispose();
    }
  });

  it("propagates native error messages", () => {
    expect(() => openDataset("/nonexistent/manifest.json", undefined)).toThrowError(
      /manifest\.json/,
    );
  });
});

describe("manifest validation passthrough", () => {
  it("reports ok for a generated dataset and violations for a broken one", () => {
    const { manifest } = makeDataset(29);
    expect(validateManifest(manifest, true)).toEqual({ ok: true, violations: [] });

    const dir = tmpDir("broken-");
    const brokenPath = path.join(dir, "broken.json");
    fs.writeFileSync(
      brokenPath,
      JSON.stringify({
        videos: [{ path: "v", length: 2, width: 8, height: 8, frames: [{ index: 7 }] }],
      }),
    );
    const report = validateManifest(brokenPath);
    expect(report.ok).toBe(false);
    expect(report.violations.some((v) => v.message.includes("index out of range"))).toBe(true);
  });
});

describe("release discipline", () => {
  it("bindings version equals the native CLI version", () => {
    assertVersionMatch();
  });
});
