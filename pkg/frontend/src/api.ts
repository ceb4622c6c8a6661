/** Thin typed client for the review service. */

import type {
  Candidate,
  ClipSummary,
  JobInfo,
  Prompt,
  RefineResponse,
  Rle,
  TrackDetail,
  TrackListing,
  TrackRecord,
} from './types.js';

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base: string, fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, '');
    this.fetchImpl = fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  frameUrl(clipId: string, frame: number): string {
    return `${this.base}/api/clips/${encodeURIComponent(clipId)}/frames/${frame}`;
  }

  listClips(): Promise<ClipSummary[]> {
    return this.request('GET', '/api/clips');
  }

  listTracks(clipId: string): Promise<TrackListing> {
    return this.request('GET', `/api/clips/${encodeURIComponent(clipId)}/tracks`);
  }

  trackDetail(clipId: string, trackId: string): Promise<TrackDetail> {
    return this.request('GET', this.trackPath(clipId, trackId));
  }

  setStatus(
    clipId: string,
    trackId: string,
    status: 'accepted' | 'rejected',
    actor: string,
  ): Promise<{ track_id: string; status: string }> {
    return this.request('POST', `${this.trackPath(clipId, trackId)}/status`, { status, actor });
  }

  refine(clipId: string, trackId: string, frame: number, prompts: Prompt[]): Promise<RefineResponse> {
    return this.request('POST', `${this.trackPath(clipId, trackId)}/refine`, { frame, prompts });
  }

  commitRefinement(
    clipId: string,
    trackId: string,
    frame: number,
    mask: Rle,
    actor: string,
  ): Promise<{ clip_id: string; track: TrackRecord }> {
    return this.request('POST', `${this.trackPath(clipId, trackId)}/refine/commit`, {
      frame,
      mask,
      actor,
    });
  }

  submitJob(clipId: string, config: Record<string, unknown> = {}): Promise<JobInfo> {
    return this.request('POST', '/api/jobs', { clip_id: clipId, config });
  }

  job(jobId: string): Promise<JobInfo> {
    return this.request('GET', `/api/jobs/${encodeURIComponent(jobId)}`);
  }

  private trackPath(clipId: string, trackId: string): string {
    return `/api/tracks/${encodeURIComponent(clipId)}/${encodeURIComponent(trackId)}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'content-type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    let res: Response;
    try {
      res = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, 'NETWORK', `cannot reach ${this.base}: ${String(err)}`);
    }
    if (!res.ok) {
      throw await this.toError(res);
    }
    return (await res.json()) as T;
  }

  private async toError(res: Response): Promise<ApiError> {
    let code = `HTTP_${res.status}`;
    let message = res.statusText || `request failed with ${res.status}`;
    try {
      const payload = (await res.json()) as { detail?: unknown };
      const detail = payload.detail;
      if (detail && typeof detail === 'object' && 'code' in detail) {
        const d = detail as { code: string; message?: string };
        code = d.code;
        message = d.message ?? message;
      } else if (typeof detail === 'string') {
        message = detail;
      } else if (Array.isArray(detail) && detail.length > 0) {
        // pydantic validation errors
        code = 'VALIDATION';
        message = JSON.stringify(detail[0]);
      }
    } catch {
      // non-JSON body, keep the HTTP fallback
    }
    return new ApiError(res.status, code, message);
  }
}

export function formatCandidate(c: Candidate): string {
  return `IoU ${c.predicted_iou.toFixed(2)} / stability ${c.stability.toFixed(2)}`;
}
