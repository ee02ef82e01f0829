/** Selection state for the composer: four slots, validation, history. */

import type { ComposeRequest, ComposeResponse, FrameRef } from "./api.js";

export type SlotName = "character" | "background" | "t1" | "t2";

export interface Selection {
  clipId: string;
  frameIndex: number;
}

export interface HistoryEntry {
  request: ComposeRequest;
  imageB64: string;
  transform: number[];
  at: number;
}

export const HISTORY_LIMIT = 50;

export class SelectionState {
  private slots: Partial<Record<SlotName, Selection>> = {};
  private history: HistoryEntry[] = [];
  lastResponse: ComposeResponse | null = null;
  lastError: string | null = null;

  select(slot: SlotName, selection: Selection): void {
    this.slots = { ...this.slots, [slot]: selection };
  }

  clear(slot: SlotName): void {
    const next = { ...this.slots };
    delete next[slot];
    this.slots = next;
  }

  get(slot: SlotName): Selection | undefined {
    return this.slots[slot];
  }

  allSlotsFilled(): boolean {
    return (["character", "background", "t1", "t2"] as SlotName[]).every(
      (s) => this.slots[s] !== undefined,
    );
  }

  /**
   * Client-side mirror of the server invariant: the transform pair must come
   * from a single clip. Strictly a subset of server validation; anything
   * allowed here is still re-checked by the service.
   */
  transformPairError(): string | null {
    const t1 = this.slots.t1;
    const t2 = this.slots.t2;
    if (!t1 || !t2) return null;
    if (t1.clipId !== t2.clipId) {
      return "transform frames t1 and t2 must come from the same clip";
    }
    return null;
  }

  composeRequest(): ComposeRequest {
    if (!this.allSlotsFilled()) {
      throw new Error("all four slots must be filled before composing");
    }
    const pairError = this.transformPairError();
    if (pairError) {
      throw new Error(pairError);
    }
    const ref = (s: Selection): FrameRef => ({ clip_id: s.clipId, frame_index: s.frameIndex });
    return {
      character_ref: ref(this.slots.character!),
      t1_ref: ref(this.slots.t1!),
      t2_ref: ref(this.slots.t2!),
      background_ref: ref(this.slots.background!),
    };
  }

  recordSuccess(request: ComposeRequest, response: ComposeResponse): void {
    this.lastResponse = response;
    this.lastError = null;
    this.history.push({
      request,
      imageB64: response.image_b64,
      transform: response.predicted_transform,
      at: Date.now(),
    });
    if (this.history.length > HISTORY_LIMIT) {
      this.history = this.history.slice(this.history.length - HISTORY_LIMIT);
    }
  }

  /** Failed requests surface the error but never reset selections or history. */
  recordFailure(message: string): void {
    this.lastError = message;
  }

  getHistory(): readonly HistoryEntry[] {
    return this.history;
  }
}
