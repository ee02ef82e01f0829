/** Typed client for the inference service HTTP API. */

export interface FrameRef {
  clip_id?: string;
  frame_index?: number;
  image_b64?: string;
}

export interface ClipEntry {
  id: string;
  num_frames: number;
  thumbnail_url: string;
}

export interface ClipPage {
  clips: ClipEntry[];
  page: number;
  page_size: number;
  total: number;
}

export interface ComposeRequest {
  character_ref: FrameRef;
  t1_ref: FrameRef;
  t2_ref: FrameRef;
  background_ref: FrameRef;
}

export interface ComposeResponse {
  image_b64: string;
  predicted_transform: number[];
  latency_ms: number;
}

export interface AnimateRequest {
  character_ref: FrameRef;
  background_ref: FrameRef;
  clip_id: string;
  t1_index?: number;
}

export interface AnimateResponse {
  frames_b64: string[];
  predicted_transforms: number[][];
  latency_ms: number;
}

export interface HealthResponse {
  status: string;
  checkpoint_hash: string;
  feature_shape: number[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.url(path), init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/health");
  }

  listClips(page: number, pageSize: number): Promise<ClipPage> {
    return this.request<ClipPage>(`/clips?page=${page}&page_size=${pageSize}`);
  }

  frameUrl(clipId: string, index: number): string {
    return this.url(`/clips/${encodeURIComponent(clipId)}/frames/${index}`);
  }

  compose(body: ComposeRequest): Promise<ComposeResponse> {
    return this.request<ComposeResponse>("/compose", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  animate(body: AnimateRequest): Promise<AnimateResponse> {
    return this.request<AnimateResponse>("/animate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
