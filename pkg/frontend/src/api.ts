import type {
  DisplayBundle,
  PanelSettings,
  PublicConfig,
  TransactionReport,
  UiEventKind,
} from "./types.js";

const RETRY_DELAY_MS = 2000;

/** Thin client over the backend HTTP interface.
 *
 * Transaction reports go through an ordered buffer: if the backend is
 * unreachable the reports queue up and are redelivered in original order
 * once a send succeeds again, so the backend's per-user ordering invariant
 * survives connectivity gaps.
 */
export class ApiClient {
  private queue: TransactionReport[] = [];
  private flushPromise: Promise<void> | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private settings: PanelSettings,
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  get pendingReports(): number {
    return this.queue.length;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.settings.authToken) {
      headers["Authorization"] = `Bearer ${this.settings.authToken}`;
    }
    return headers;
  }

  private url(path: string): string {
    return this.settings.baseUrl.replace(/\/$/, "") + path;
  }

  async getState(): Promise<DisplayBundle> {
    const response = await this.fetchFn(
      this.url(`/v1/state/${encodeURIComponent(this.settings.userId)}`),
      { headers: this.headers() },
    );
    if (!response.ok) throw new Error(`state read failed: ${response.status}`);
    return (await response.json()) as DisplayBundle;
  }

  async getConfig(): Promise<PublicConfig> {
    const response = await this.fetchFn(this.url("/v1/config"), {
      headers: this.headers(),
    });
    if (!response.ok) throw new Error(`config read failed: ${response.status}`);
    return (await response.json()) as PublicConfig;
  }

  async postUiEvent(kind: UiEventKind): Promise<void> {
    const response = await this.fetchFn(this.url("/v1/events/ui"), {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({
        user_id: this.settings.userId,
        kind,
        at: new Date().toISOString(),
      }),
    });
    if (!response.ok) throw new Error(`ui event failed: ${response.status}`);
  }

  /** Enqueue a transaction report and start delivering. Never throws:
   * failures keep the report queued for a later retry. */
  reportTransaction(report: TransactionReport): void {
    this.queue.push(report);
    void this.flush();
  }

  /** Deliver the queue head-first, stopping at the first failure. Awaiting
   * while a flush is already running joins that flush instead of racing it. */
  flush(): Promise<void> {
    if (this.flushPromise === null) {
      this.flushPromise = this.drain().finally(() => {
        this.flushPromise = null;
      });
    }
    return this.flushPromise;
  }

  private async drain(): Promise<void> {
    while (this.queue.length > 0) {
      const report = this.queue[0];
      let delivered = false;
      try {
        const response = await this.fetchFn(this.url("/v1/events/transaction"), {
          method: "POST",
          headers: this.headers(),
          body: JSON.stringify(report),
        });
        delivered = response.ok;
      } catch {
        delivered = false;
      }
      if (!delivered) {
        this.scheduleRetry();
        return;
      }
      this.queue.shift();
    }
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      void this.flush();
    }, RETRY_DELAY_MS);
  }

  dispose(): void {
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
  }
}
