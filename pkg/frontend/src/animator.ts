/** Frame-sequence playback and strip export, independent of the DOM clock. */

export const MIN_FPS = 1;
export const MAX_FPS = 10;

export function clampFps(fps: number): number {
  if (!Number.isFinite(fps)) return MIN_FPS;
  return Math.min(MAX_FPS, Math.max(MIN_FPS, Math.round(fps)));
}

export function frameIntervalMs(fps: number): number {
  return 1000 / clampFps(fps);
}

/**
 * Playback schedule for a frame list: which frame is visible at time t.
 * Loops when `loop` is set; otherwise holds the last frame.
 */
export function frameAt(frameCount: number, elapsedMs: number, fps: number, loop: boolean): number {
  if (frameCount <= 0) throw new Error("no frames to play");
  const raw = Math.floor(elapsedMs / frameIntervalMs(fps));
  if (loop) return raw % frameCount;
  return Math.min(raw, frameCount - 1);
}

export interface StripLayout {
  width: number;
  height: number;
  offsets: { x: number; y: number }[];
}

/** Horizontal strip: n frames side by side, strip width = n * frame width. */
export function stripLayout(frameCount: number, frameWidth: number, frameHeight: number): StripLayout {
  if (frameCount <= 0) throw new Error("no frames to export");
  return {
    width: frameCount * frameWidth,
    height: frameHeight,
    offsets: Array.from({ length: frameCount }, (_, k) => ({ x: k * frameWidth, y: 0 })),
  };
}

export class Player {
  private timer: ReturnType<typeof setInterval> | null = null;
  private index = 0;

  constructor(
    private frames: string[],
    private readonly onFrame: (frameB64: string, index: number) => void,
  ) {}

  get frameCount(): number {
    return this.frames.length;
  }

  start(fps: number, loop = true): void {
    this.stop();
    if (this.frames.length === 0) return;
    this.index = 0;
    this.onFrame(this.frames[0], 0);
    this.timer = setInterval(() => {
      this.index += 1;
      if (this.index >= this.frames.length) {
        if (!loop) {
          this.stop();
          return;
        }
        this.index = 0;
      }
      this.onFrame(this.frames[this.index], this.index);
    }, frameIntervalMs(fps));
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
