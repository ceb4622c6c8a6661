/**
 * Review session controller. Holds all client state and talks to the API;
 * completely DOM-free so the whole QA loop is testable in node.
 *
 * State changes follow one rule: nothing is updated optimistically. After a
 * status change or a committed refinement the authoritative track comes
 * back from the server (or is re-fetched) before listeners are notified.
 */

import { ApiClient, ApiError } from './api.js';
import type {
  Candidate,
  ClipSummary,
  FrameEntry,
  Prompt,
  TrackDetail,
  TrackListing,
  TrackSummary,
} from './types.js';

/** localStorage look-alike so tests can inject a plain map. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const ACTOR_KEY = 'masktrack.actor';

export interface SessionState {
  clips: ClipSummary[];
  clipId: string | null;
  listing: TrackListing | null;
  trackIndex: number;
  detail: TrackDetail | null;
  frame: number;
  prompts: Prompt[];
  candidates: Candidate[];
  chosen: number | null;
  banner: string | null;
  loading: boolean;
}

export class ReviewSession {
  readonly state: SessionState = {
    clips: [],
    clipId: null,
    listing: null,
    trackIndex: -1,
    detail: null,
    frame: 1,
    prompts: [],
    candidates: [],
    chosen: null,
    banner: null,
    loading: false,
  };

  private listeners: (() => void)[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly store: KeyValueStore,
  ) {}

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  get actor(): string {
    return this.store.getItem(ACTOR_KEY) ?? 'annotator';
  }

  set actor(value: string) {
    this.store.setItem(ACTOR_KEY, value.trim() || 'annotator');
  }

  get gamma(): number {
    return this.state.listing?.gamma ?? 0.9;
  }

  selectedTrack(): TrackSummary | null {
    const listing = this.state.listing;
    if (!listing || this.state.trackIndex < 0) return null;
    return listing.tracks[this.state.trackIndex] ?? null;
  }

  currentEntry(): FrameEntry | null {
    const detail = this.state.detail;
    if (!detail) return null;
    return detail.track.frames.find((f) => f.frame_index === this.state.frame) ?? null;
  }

  frameUrl(): string | null {
    if (!this.state.clipId) return null;
    return this.api.frameUrl(this.state.clipId, this.state.frame);
  }

  /** Steps at or below gamma would be dropped by the filter; flag them. */
  subGammaFrames(track: TrackSummary): number[] {
    const flagged: number[] = [];
    track.step_ious.forEach((value, i) => {
      if (value !== null && value <= this.gamma) {
        flagged.push(track.start_frame + i);
      }
    });
    return flagged;
  }

  async loadClips(): Promise<void> {
    await this.guarded(async () => {
      this.state.clips = await this.api.listClips();
    });
  }

  async openClip(clipId: string): Promise<void> {
    await this.guarded(async () => {
      this.state.clipId = clipId;
      this.state.listing = await this.api.listTracks(clipId);
      this.state.trackIndex = -1;
      this.state.detail = null;
      this.clearRefinement(false);
      if (this.state.listing.tracks.length > 0) {
        await this.fetchTrack(0);
      }
    });
  }

  async selectTrack(index: number): Promise<void> {
    await this.guarded(() => this.fetchTrack(index));
  }

  private async fetchTrack(index: number): Promise<void> {
    const listing = this.state.listing;
    if (!listing) return;
    const summary = listing.tracks[index];
    if (!summary || !this.state.clipId) return;
    this.state.trackIndex = index;
    this.state.detail = await this.api.trackDetail(this.state.clipId, summary.track_id);
    this.state.frame = summary.start_frame;
    this.clearRefinement(false);
  }

  gotoFrame(frame: number): void {
    const track = this.selectedTrack();
    if (!track) return;
    const last = track.start_frame + track.length - 1;
    this.state.frame = Math.min(Math.max(frame, track.start_frame), last);
    this.clearRefinement(false);
    this.notify();
  }

  nextFrame(): void {
    this.gotoFrame(this.state.frame + 1);
  }

  prevFrame(): void {
    this.gotoFrame(this.state.frame - 1);
  }

  async setStatus(status: 'accepted' | 'rejected'): Promise<void> {
    const track = this.selectedTrack();
    if (!track || !this.state.clipId) return;
    const clip = this.state.clipId;
    const index = this.state.trackIndex;
    await this.guarded(async () => {
      await this.api.setStatus(clip, track.track_id, status, this.actor);
      // re-read instead of patching local state
      this.state.listing = await this.api.listTracks(clip);
      await this.fetchTrack(index);
    });
  }

  accept(): Promise<void> {
    return this.setStatus('accepted');
  }

  reject(): Promise<void> {
    return this.setStatus('rejected');
  }

  /** Record a click in mask pixel coordinates. */
  addClick(x: number, y: number, negative = false): void {
    this.state.prompts.push({ x, y, label: negative ? 'neg' : 'pos' });
    this.state.candidates = [];
    this.state.chosen = null;
    this.notify();
  }

  clearPrompts(): void {
    this.clearRefinement(true);
  }

  async preview(): Promise<void> {
    const track = this.selectedTrack();
    if (!track || !this.state.clipId) return;
    if (!this.state.prompts.some((p) => p.label === 'pos')) {
      this.state.banner = 'add at least one positive click before previewing';
      this.notify();
      return;
    }
    const clip = this.state.clipId;
    await this.guarded(async () => {
      const res = await this.api.refine(clip, track.track_id, this.state.frame, this.state.prompts);
      this.state.candidates = res.candidates;
      this.state.chosen = null;
      if (res.candidates.length === 0) {
        this.state.banner = 'segmenter returned no candidates for these clicks';
      }
    });
  }

  chooseCandidate(index: number): void {
    if (index >= 0 && index < this.state.candidates.length) {
      this.state.chosen = index;
      this.notify();
    }
  }

  get canCommit(): boolean {
    return this.state.chosen !== null;
  }

  async commit(): Promise<void> {
    const track = this.selectedTrack();
    const chosen = this.state.chosen;
    if (!track || !this.state.clipId || chosen === null) return;
    const candidate = this.state.candidates[chosen];
    if (!candidate) return;
    const clip = this.state.clipId;
    const index = this.state.trackIndex;
    await this.guarded(async () => {
      const res = await this.api.commitRefinement(
        clip,
        track.track_id,
        this.state.frame,
        candidate.mask,
        this.actor,
      );
      if (this.state.detail) {
        this.state.detail = { ...this.state.detail, track: res.track };
      }
      // step_ious in the listing changed too
      this.state.listing = await this.api.listTracks(clip);
      this.state.trackIndex = index;
      this.clearRefinement(false);
    });
  }

  private clearRefinement(notify: boolean): void {
    this.state.prompts = [];
    this.state.candidates = [];
    this.state.chosen = null;
    if (notify) this.notify();
  }

  private async guarded(work: () => Promise<void>): Promise<void> {
    this.state.loading = true;
    this.state.banner = null;
    this.notify();
    try {
      await work();
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.banner = `${err.code}: ${err.message}`;
      } else {
        this.state.banner = String(err);
      }
    } finally {
      this.state.loading = false;
      this.notify();
    }
  }
}
