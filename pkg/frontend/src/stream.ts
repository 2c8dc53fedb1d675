import type { DisplayBundle, PanelSettings } from "./types.js";

export interface StreamHandle {
  close(): void;
}

export interface StreamCallbacks {
  onBundle(bundle: DisplayBundle): void;
  onStatus?(connected: boolean): void;
}

/** Subscribe to the backend's one-way SSE update stream.
 *
 * Every frame is a complete display bundle, so the panel can render from
 * any single message; EventSource handles reconnection itself and we just
 * surface connection status so the panel can show a stale-data indicator.
 */
export function connectStream(
  settings: PanelSettings,
  callbacks: StreamCallbacks,
  eventSourceFactory: (url: string) => EventSource = (url) => new EventSource(url),
): StreamHandle {
  const base = settings.baseUrl.replace(/\/$/, "");
  const source = eventSourceFactory(
    `${base}/v1/stream/${encodeURIComponent(settings.userId)}`,
  );
  source.onopen = () => callbacks.onStatus?.(true);
  source.onerror = () => callbacks.onStatus?.(false);
  source.onmessage = (message: MessageEvent) => {
    try {
      callbacks.onBundle(JSON.parse(message.data as string) as DisplayBundle);
    } catch {
      // A malformed frame is dropped; the next frame carries full state.
    }
  };
  return { close: () => source.close() };
}
