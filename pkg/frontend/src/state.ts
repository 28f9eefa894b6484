import { NEUTRAL, NUM_ATTRIBUTES } from './types';

export interface TrackPlayback {
  frames: number[][];
  position: number;
}

// Editor model: current slider vector, per-attribute overrides applied on
// top of an imported track, and playback position. Pure state — no DOM, no
// network — so it is directly testable.
export class EditorState {
  private values: number[] = [...NEUTRAL];
  private overrides = new Map<number, number>();
  private track: TrackPlayback | null = null;
  sessionId: string | null = null;

  get attributes(): number[] {
    return this.values.slice();
  }

  setAttribute(index: number, value: number): void {
    if (index < 0 || index >= NUM_ATTRIBUTES) {
      throw new RangeError(`attribute index ${index} out of range`);
    }
    this.values[index] = clamp01(value);
  }

  resetNeutral(): void {
    this.values = [...NEUTRAL];
  }

  /** Pin one slider so track playback cannot move it. */
  setOverride(index: number, value: number | null): void {
    if (index < 0 || index >= NUM_ATTRIBUTES) {
      throw new RangeError(`attribute index ${index} out of range`);
    }
    if (value === null) this.overrides.delete(index);
    else this.overrides.set(index, clamp01(value));
  }

  get overrideEntries(): [number, number][] {
    return [...this.overrides.entries()].sort((a, b) => a[0] - b[0]);
  }

  loadTrack(frames: number[][]): void {
    if (!frames.length || frames.some((f) => f.length !== NUM_ATTRIBUTES)) {
      throw new RangeError('track must be non-empty rows of 20 values');
    }
    this.track = { frames: frames.map((f) => f.slice()), position: 0 };
    this.applyFrame();
  }

  get trackLength(): number {
    return this.track ? this.track.frames.length : 0;
  }

  get trackPosition(): number {
    return this.track ? this.track.position : 0;
  }

  seek(position: number): void {
    if (!this.track) return;
    const n = this.track.frames.length;
    this.track.position = Math.min(n - 1, Math.max(0, Math.floor(position)));
    this.applyFrame();
  }

  /** Advance one frame; returns false once the end is reached. */
  step(): boolean {
    if (!this.track) return false;
    if (this.track.position + 1 >= this.track.frames.length) return false;
    this.track.position += 1;
    this.applyFrame();
    return true;
  }

  private applyFrame(): void {
    if (!this.track) return;
    this.values = this.track.frames[this.track.position].slice();
    for (const [i, v] of this.overrides) this.values[i] = v;
  }
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}
