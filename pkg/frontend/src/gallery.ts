/** Clip gallery: pagination math and card data, kept separate from the DOM. */

import type { ClipEntry, ClipPage, ServiceClient } from "./api.js";

export const PAGE_SIZE = 8;

export function pageCount(total: number, pageSize: number = PAGE_SIZE): number {
  return Math.max(1, Math.ceil(total / pageSize));
}

export function clampPage(page: number, total: number, pageSize: number = PAGE_SIZE): number {
  return Math.min(Math.max(1, page), pageCount(total, pageSize));
}

export interface GalleryCard {
  clipId: string;
  numFrames: number;
  thumbnailUrl: string;
  frameUrls: string[];
}

export function toCards(client: ServiceClient, page: ClipPage): GalleryCard[] {
  return page.clips.map((entry: ClipEntry) => ({
    clipId: entry.id,
    numFrames: entry.num_frames,
    thumbnailUrl: client.url(entry.thumbnail_url),
    frameUrls: Array.from({ length: entry.num_frames }, (_, k) => client.frameUrl(entry.id, k)),
  }));
}
