import { describe, expect, it } from "vitest";

import { computeMetric } from "../src/index.js";

describe("metric parity with the native implementation", () => {
  it("iou of the reference overlap is exactly one third", () => {
    const value = computeMetric("iou", [0, 0, 10, 10], [5, 0, 15, 10]);
    expect(Math.abs(value - 1 / 3)).toBeLessThan(1e-12);
  });

  it("identical maps correlate at 1", () => {
    const map = [
      [0.2, 0.4, 0.1],
      [0.9, 0.3, 0.7],
    ];
    expect(Math.abs(computeMetric("cc", map, map) - 1.0)).toBeLessThan(1e-12);
  });

  it("cc reproduces the hand-computed -1/3 case", () => {
    const value = computeMetric(
      "cc",
      [
        [1, 0],
        [0, 0],
      ],
      [
        [0, 1],
        [0, 0],
      ],
    );
    expect(Math.abs(value + 1 / 3)).toBeLessThan(1e-12);
  });

  it("nss reproduces the hand-computed 1.5 case", () => {
    const value = computeMetric(
      "nss",
      [
        [1, 0],
        [0, 0],
      ],
      [
        [1, 0],
        [0, 0],
      ],
    );
    expect(Math.abs(value - 1.5)).toBeLessThan(1e-12);
  });

  it("nss on a constant map raises the native degenerate-map error", () => {
    expect(() =>
      computeMetric(
        "nss",
        [
          [1, 1],
          [1, 1],
        ],
        [
          [1, 0],
          [0, 0],
        ],
      ),
    ).toThrowError(/constant/);
  });

  it("accuracy matches a hand count", () => {
    expect(computeMetric("accuracy", [0, 1, 2, 0], [0, 1, 1, 0])).toBe(0.75);
  });

  it("eleven-point ap reproduces the two-detection 0.5 case", () => {
    const detections = [
      { image_id: "img", label: 0, box: [0, 7, 10, 10], confidence: 0.9 },
      { image_id: "img", label: 0, box: [0, 3, 10, 10], confidence: 0.8 },
    ];
    const groundTruth = { img: [{ label: 0, xmin: 0, ymin: 0, xmax: 10, ymax: 10 }] };
    expect(computeMetric("ap", detections, groundTruth)).toBe(0.5);
    expect(
      computeMetric("map", detections, groundTruth, { interpolation: "all" }),
    ).toBeCloseTo(0.5, 12);
  });
});
