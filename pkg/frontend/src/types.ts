/** Wire types mirroring the review service's JSON responses. */

export interface Rle {
  size: [number, number];
  counts: number[];
}

export interface ClipSummary {
  clip_id: string;
  dims: [number, number];
  frame_count: number;
  track_count: number;
  statuses: Record<string, number>;
  manifest: string | null;
}

export interface TrackSummary {
  track_id: string;
  status: string;
  start_frame: number;
  length: number;
  step_ious: (number | null)[];
  sources: string[];
}

export interface TrackListing {
  clip_id: string;
  frame_count: number;
  gamma: number;
  tracks: TrackSummary[];
}

export interface FrameEntry {
  frame_index: number;
  mask: Rle;
  source: string;
  step_iou?: number;
  resample?: boolean;
}

export interface TrackRecord {
  track_id: string;
  status: string;
  frames: FrameEntry[];
}

export interface TrackDetail {
  clip_id: string;
  dims: [number, number];
  frame_count: number;
  gamma: number;
  track: TrackRecord;
}

export interface Prompt {
  x: number;
  y: number;
  label: 'pos' | 'neg';
}

export interface Candidate {
  mask: Rle;
  predicted_iou: number;
  stability: number;
}

export interface RefineResponse {
  frame: number;
  candidates: Candidate[];
}

export interface JobProgress {
  done: number;
  total: number;
}

export interface JobInfo {
  job_id: string;
  clip_id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  progress: JobProgress;
  error: string | null;
}
