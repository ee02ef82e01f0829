import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { clampFps, frameAt, frameIntervalMs, Player, stripLayout } from "../src/animator.js";

describe("fps handling", () => {
  it("clamps to the 1..10 range", () => {
    expect(clampFps(0)).toBe(1);
    expect(clampFps(1)).toBe(1);
    expect(clampFps(7.4)).toBe(7);
    expect(clampFps(10)).toBe(10);
    expect(clampFps(99)).toBe(10);
    expect(clampFps(Number.NaN)).toBe(1);
  });

  it("interval follows the clamped rate", () => {
    expect(frameIntervalMs(4)).toBe(250);
    expect(frameIntervalMs(100)).toBe(100);
  });
});

describe("frameAt", () => {
  it("advances one frame per interval and loops", () => {
    expect(frameAt(5, 0, 4, true)).toBe(0);
    expect(frameAt(5, 260, 4, true)).toBe(1);
    expect(frameAt(5, 5 * 250, 4, true)).toBe(0);
  });

  it("holds the last frame when not looping", () => {
    expect(frameAt(5, 10_000, 4, false)).toBe(4);
  });

  it("rejects empty sequences", () => {
    expect(() => frameAt(0, 0, 4, true)).toThrow();
  });
});

describe("stripLayout", () => {
  it("lays five frames side by side: width is five frame widths", () => {
    const layout = stripLayout(5, 64, 64);
    expect(layout.width).toBe(5 * 64);
    expect(layout.height).toBe(64);
    expect(layout.offsets).toEqual([
      { x: 0, y: 0 },
      { x: 64, y: 0 },
      { x: 128, y: 0 },
      { x: 192, y: 0 },
      { x: 256, y: 0 },
    ]);
  });

  it("rejects empty exports", () => {
    expect(() => stripLayout(0, 64, 64)).toThrow();
  });
});

describe("Player", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("plays exactly the frames it was given, in order", () => {
    const shown: Array<[string, number]> = [];
    const player = new Player(["a", "b", "c"], (frame, index) => shown.push([frame, index]));
    player.start(10, false);
    vi.advanceTimersByTime(100 * 3);
    player.stop();
    expect(shown).toEqual([
      ["a", 0],
      ["b", 1],
      ["c", 2],
    ]);
  });

  it("loops when asked", () => {
    const shown: string[] = [];
    const player = new Player(["a", "b"], (frame) => shown.push(frame));
    player.start(10, true);
    vi.advanceTimersByTime(100 * 4);
    player.stop();
    expect(shown).toEqual(["a", "b", "a", "b", "a"]);
  });
});
