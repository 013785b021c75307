/**
 * Reconnecting subscription over the ndjson streaming endpoint.
 *
 * The owner of a subscription sees records plus a live/stale flag; on
 * any disconnect the state flips to stale and a resubscribe starts
 * after a short backoff. Stream handling never blocks the caller.
 */

import type { ApiClient, WindowRecord } from "./api.js";

export type StreamState = "connecting" | "live" | "stale" | "stopped";

export class StreamSubscription {
  state: StreamState = "connecting";
  reconnects = 0;
  private abort: AbortController | null = null;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private api: ApiClient,
    private url: string,
    private onRecord: (record: WindowRecord) => void,
    private onState: (state: StreamState) => void = () => {},
    private backoffMs = 1000,
  ) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  private setState(state: StreamState): void {
    this.state = state;
    this.onState(state);
  }

  private async loop(): Promise<void> {
    if (this.stopped) return;
    this.abort = new AbortController();
    this.setState("connecting");
    try {
      await this.api.readStream(
        this.url,
        (record) => {
          if (this.state !== "live") this.setState("live");
          this.onRecord(record);
        },
        this.abort.signal,
      );
    } catch {
      // fall through to the stale/retry path
    }
    if (this.stopped) return;
    this.setState("stale");
    this.reconnects += 1;
    this.timer = setTimeout(() => void this.loop(), this.backoffMs);
  }

  stop(): void {
    this.stopped = true;
    if (this.timer) clearTimeout(this.timer);
    this.abort?.abort();
    this.setState("stopped");
  }
}
