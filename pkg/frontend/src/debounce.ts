/**
 * Rate-limited trailing debouncer for preview requests: at most one call per
 * `minIntervalMs` (default 250 ms => <= 4 req/s), with the latest pending
 * request flushed at the next allowed slot. Superseded pending requests are
 * dropped, never queued.
 */

export class RateLimitedDebouncer<T> {
  private lastFire = -Infinity;
  private pending: T | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  calls = 0;

  constructor(
    private readonly fn: (arg: T) => void,
    private readonly minIntervalMs = 250,
  ) {}

  request(arg: T): void {
    const now = Date.now();
    if (now - this.lastFire >= this.minIntervalMs && this.timer === null) {
      this.fire(arg, now);
      return;
    }
    this.pending = arg; // supersede whatever was waiting
    if (this.timer === null) {
      const wait = Math.max(0, this.lastFire + this.minIntervalMs - now);
      this.timer = setTimeout(() => this.flush(), wait);
    }
  }

  private flush(): void {
    this.timer = null;
    if (this.pending !== null) {
      const arg = this.pending;
      this.pending = null;
      this.fire(arg, Date.now());
    }
  }

  private fire(arg: T, now: number): void {
    this.lastFire = now;
    this.calls++;
    this.fn(arg);
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.pending = null;
  }
}
