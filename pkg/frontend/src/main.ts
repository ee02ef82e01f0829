/** Wires the composer UI: gallery, selection slots, compose panel, animation. */

import { ApiError, ServiceClient } from "./api.js";
import type { AnimateResponse, ComposeRequest } from "./api.js";
import { clampFps, Player, stripLayout } from "./animator.js";
import { clampPage, PAGE_SIZE, toCards } from "./gallery.js";
import { SelectionState } from "./state.js";
import type { SlotName } from "./state.js";

const SLOTS: SlotName[] = ["character", "background", "t1", "t2"];

let client = new ServiceClient(localStorage.getItem("scenefactor.baseUrl") ?? "http://127.0.0.1:8000");
const state = new SelectionState();
let activeSlot: SlotName = "character";
let currentPage = 1;
let totalClips = 0;
let composeBusy = false;
let queuedCompose = false;
let player: Player | null = null;
let lastAnimation: AnimateResponse | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

async function refreshHealth(): Promise<void> {
  const status = el<HTMLSpanElement>("health");
  try {
    const health = await client.health();
    status.textContent = `connected (${health.checkpoint_hash.slice(0, 8)}, features ${health.feature_shape.join("x")})`;
    setBanner(null);
  } catch (err) {
    status.textContent = "unreachable";
    setBanner(`service unreachable at ${client.url("")}: ${String(err)}`);
  }
}

async function renderGallery(): Promise<void> {
  const grid = el<HTMLDivElement>("gallery");
  grid.textContent = "";
  let page;
  try {
    page = await client.listClips(currentPage, PAGE_SIZE);
  } catch (err) {
    setBanner(`cannot list clips: ${String(err)}`);
    return;
  }
  totalClips = page.total;
  el<HTMLSpanElement>("page-info").textContent = `page ${page.page} / ${Math.max(1, Math.ceil(page.total / PAGE_SIZE))} (${page.total} clips)`;
  if (page.total === 0) {
    grid.textContent = "no clips in the attached dataset";
    return;
  }
  for (const card of toCards(client, page)) {
    const box = document.createElement("div");
    box.className = "card";
    const title = document.createElement("div");
    title.textContent = card.clipId;
    title.className = "card-title";
    box.appendChild(title);
    const strip = document.createElement("div");
    strip.className = "frame-strip";
    card.frameUrls.forEach((url, index) => {
      const img = document.createElement("img");
      img.src = url;
      img.title = `${card.clipId} frame ${index} -> ${activeSlot}`;
      img.addEventListener("click", () => {
        state.select(activeSlot, { clipId: card.clipId, frameIndex: index });
        renderSlots();
      });
      strip.appendChild(img);
    });
    box.appendChild(strip);
    grid.appendChild(box);
  }
}

function renderSlots(): void {
  for (const slot of SLOTS) {
    const cell = el<HTMLDivElement>(`slot-${slot}`);
    cell.textContent = "";
    const selection = state.get(slot);
    const label = document.createElement("div");
    label.textContent = selection ? `${selection.clipId} / frame ${selection.frameIndex}` : "(empty)";
    cell.appendChild(label);
    if (selection) {
      const img = document.createElement("img");
      img.src = client.frameUrl(selection.clipId, selection.frameIndex);
      cell.appendChild(img);
    }
  }
  const pairError = state.transformPairError();
  el<HTMLDivElement>("pair-error").textContent = pairError ?? "";
  el<HTMLButtonElement>("compose").disabled = !state.allSlotsFilled() || pairError !== null;
  el<HTMLButtonElement>("animate").disabled =
    !state.get("character") || !state.get("background") || !state.get("t1");
}

function renderHistory(): void {
  const list = el<HTMLDivElement>("history");
  list.textContent = "";
  const entries = state.getHistory();
  for (let k = entries.length - 1; k >= 0; k--) {
    const entry = entries[k];
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${entry.imageB64}`;
    img.title = new Date(entry.at).toISOString();
    img.addEventListener("click", () => showResult(entry.imageB64, entry.transform));
    list.appendChild(img);
  }
}

function showResult(imageB64: string, transform: number[]): void {
  // the displayed bytes are exactly the service response, never re-encoded
  el<HTMLImageElement>("result").src = `data:image/png;base64,${imageB64}`;
  el<HTMLDivElement>("transform").textContent =
    "T = [" + transform.map((v) => v.toFixed(4)).join(", ") + "]";
}

async function composeOnce(): Promise<void> {
  let request: ComposeRequest;
  try {
    request = state.composeRequest();
  } catch (err) {
    setBanner(String(err));
    return;
  }
  if (composeBusy) {
    if (el<HTMLInputElement>("queue-mode").checked) queuedCompose = true;
    return;
  }
  composeBusy = true;
  el<HTMLButtonElement>("compose").disabled = true;
  try {
    const response = await client.compose(request);
    state.recordSuccess(request, response);
    showResult(response.image_b64, response.predicted_transform);
    renderHistory();
    setBanner(null);
  } catch (err) {
    const message = err instanceof ApiError ? `compose failed: ${err.message}` : String(err);
    state.recordFailure(message);
    setBanner(message);
  } finally {
    composeBusy = false;
    renderSlots();
    if (queuedCompose) {
      queuedCompose = false;
      void composeOnce();
    }
  }
}

async function animateOnce(): Promise<void> {
  const character = state.get("character");
  const background = state.get("background");
  const t1 = state.get("t1");
  if (!character || !background || !t1) return;
  try {
    const response = await client.animate({
      character_ref: { clip_id: character.clipId, frame_index: character.frameIndex },
      background_ref: { clip_id: background.clipId, frame_index: background.frameIndex },
      clip_id: t1.clipId,
      t1_index: t1.frameIndex,
    });
    lastAnimation = response;
    startPlayback();
    setBanner(null);
  } catch (err) {
    state.recordFailure(String(err));
    setBanner(`animate failed: ${String(err)}`);
  }
}

function startPlayback(): void {
  if (!lastAnimation) return;
  player?.stop();
  const target = el<HTMLImageElement>("animation");
  // frames are shown exactly as returned by /animate
  player = new Player(lastAnimation.frames_b64, (frame, index) => {
    target.src = `data:image/png;base64,${frame}`;
    el<HTMLSpanElement>("frame-counter").textContent = `${index + 1}/${lastAnimation!.frames_b64.length}`;
  });
  const fps = clampFps(Number(el<HTMLInputElement>("fps").value));
  el<HTMLSpanElement>("fps-label").textContent = `${fps} fps`;
  player.start(fps);
}

async function exportStrip(): Promise<void> {
  if (!lastAnimation || lastAnimation.frames_b64.length === 0) return;
  const images = await Promise.all(
    lastAnimation.frames_b64.map(
      (b64) =>
        new Promise<HTMLImageElement>((resolve, reject) => {
          const img = new Image();
          img.onload = () => resolve(img);
          img.onerror = reject;
          img.src = `data:image/png;base64,${b64}`;
        }),
    ),
  );
  const layout = stripLayout(images.length, images[0].naturalWidth, images[0].naturalHeight);
  const canvas = document.createElement("canvas");
  canvas.width = layout.width;
  canvas.height = layout.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  images.forEach((img, k) => ctx.drawImage(img, layout.offsets[k].x, layout.offsets[k].y));
  const link = document.createElement("a");
  link.download = "animation_strip.png";
  link.href = canvas.toDataURL("image/png");
  link.click();
}

function init(): void {
  const baseInput = el<HTMLInputElement>("base-url");
  baseInput.value = client.url("");
  el<HTMLButtonElement>("connect").addEventListener("click", () => {
    client = new ServiceClient(baseInput.value);
    localStorage.setItem("scenefactor.baseUrl", baseInput.value);
    currentPage = 1;
    void refreshHealth().then(renderGallery);
  });
  for (const slot of SLOTS) {
    el<HTMLInputElement>(`pick-${slot}`).addEventListener("change", () => {
      activeSlot = slot;
    });
  }
  el<HTMLButtonElement>("prev").addEventListener("click", () => {
    currentPage = clampPage(currentPage - 1, totalClips);
    void renderGallery();
  });
  el<HTMLButtonElement>("next").addEventListener("click", () => {
    currentPage = clampPage(currentPage + 1, totalClips);
    void renderGallery();
  });
  el<HTMLButtonElement>("compose").addEventListener("click", () => void composeOnce());
  el<HTMLButtonElement>("animate").addEventListener("click", () => void animateOnce());
  el<HTMLInputElement>("fps").addEventListener("input", startPlayback);
  el<HTMLButtonElement>("export-strip").addEventListener("click", () => void exportStrip());
  renderSlots();
  void refreshHealth().then(renderGallery);
}

document.addEventListener("DOMContentLoaded", init);
