/**
 * End-to-end checks against a live inference service. Point
 * SCENEFACTOR_SERVICE_URL at a running `scenefactor serve` instance (with a
 * dataset attached) to enable; skipped otherwise.
 */
import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { SelectionState } from "../src/state.js";

const base = process.env.SCENEFACTOR_SERVICE_URL;
const live = describe.skipIf(!base);

live("composer against live service", () => {
  const client = new ServiceClient(base ?? "");

  it("health is ok", async () => {
    const health = await client.health();
    expect(health.status).toBe("ok");
  });

  it("the displayed render is byte-identical to a direct API call", async () => {
    const page = await client.listClips(1, 2);
    expect(page.total).toBeGreaterThan(0);
    const clip = page.clips[0];

    const state = new SelectionState();
    state.select("character", { clipId: clip.id, frameIndex: 0 });
    state.select("background", { clipId: clip.id, frameIndex: 0 });
    state.select("t1", { clipId: clip.id, frameIndex: 0 });
    state.select("t2", { clipId: clip.id, frameIndex: 1 });

    const request = state.composeRequest();
    const uiResponse = await client.compose(request);
    state.recordSuccess(request, uiResponse);

    // what the UI displays is state.lastResponse.image_b64, unmodified
    const direct = await client.compose({
      character_ref: { clip_id: clip.id, frame_index: 0 },
      t1_ref: { clip_id: clip.id, frame_index: 0 },
      t2_ref: { clip_id: clip.id, frame_index: 1 },
      background_ref: { clip_id: clip.id, frame_index: 0 },
    });
    expect(state.lastResponse?.image_b64).toBe(direct.image_b64);
  });

  it("cross-clip transform pairs are blocked before any request is sent", async () => {
    const page = await client.listClips(1, 2);
    expect(page.clips.length).toBeGreaterThan(1);
    const state = new SelectionState();
    state.select("character", { clipId: page.clips[0].id, frameIndex: 0 });
    state.select("background", { clipId: page.clips[0].id, frameIndex: 0 });
    state.select("t1", { clipId: page.clips[0].id, frameIndex: 0 });
    state.select("t2", { clipId: page.clips[1].id, frameIndex: 0 });
    expect(state.transformPairError()).not.toBeNull();
    expect(() => state.composeRequest()).toThrow();
  });

  it("animation playback receives exactly the frames from /animate", async () => {
    const page = await client.listClips(1, 1);
    const clip = page.clips[0];
    const response = await client.animate({
      character_ref: { clip_id: clip.id, frame_index: 0 },
      background_ref: { clip_id: clip.id, frame_index: 0 },
      clip_id: clip.id,
      t1_index: 0,
    });
    expect(response.frames_b64).toHaveLength(clip.num_frames);

    const { Player } = await import("../src/animator.js");
    const played: string[] = [];
    const player = new Player(response.frames_b64, (frame) => played.push(frame));
    player.start(10, false);
    await new Promise((resolve) => setTimeout(resolve, 100 * (clip.num_frames + 1)));
    player.stop();
    expect(played).toEqual(response.frames_b64);
  });
});
