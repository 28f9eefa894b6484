// Slider moves arrive far faster than the model renders. The scheduler
// debounces bursts, keeps at most one request in flight, and always follows
// up with the newest attribute vector once the current request settles —
// intermediate states are dropped, never queued.

export type Renderer = (attributes: number[]) => Promise<string>;

export interface SchedulerHooks {
  onImage: (image: string) => void;
  onError?: (err: unknown) => void;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
  clearTimeoutFn?: (handle: unknown) => void;
}

export class PreviewScheduler {
  private pending: number[] | null = null;
  private inFlight = false;
  private timer: unknown = null;
  private generation = 0;

  constructor(
    private render: Renderer,
    private hooks: SchedulerHooks,
    private debounceMs = 120,
  ) {}

  /** Latest attribute vector wins; earlier unsent ones are discarded. */
  request(attributes: number[]): void {
    this.pending = attributes.slice();
    const setT = this.hooks.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    const clearT = this.hooks.clearTimeoutFn ?? ((h) => clearTimeout(h as number));
    if (this.timer !== null) clearT(this.timer);
    this.timer = setT(() => {
      this.timer = null;
      void this.flush();
    }, this.debounceMs);
  }

  /** Drop anything pending and ignore in-flight results (e.g. new session). */
  reset(): void {
    this.pending = null;
    this.generation += 1;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private async flush(): Promise<void> {
    if (this.inFlight || this.pending === null) return;
    const attrs = this.pending;
    this.pending = null;
    this.inFlight = true;
    const gen = this.generation;
    try {
      const image = await this.render(attrs);
      if (gen === this.generation) this.hooks.onImage(image);
    } catch (err) {
      if (gen === this.generation) this.hooks.onError?.(err);
    } finally {
      this.inFlight = false;
    }
    // A newer vector may have arrived while we were rendering.
    if (this.pending !== null) void this.flush();
  }
}
