import { ApiClient } from "./api.js";
import { observeHostTraffic, type ObserverHandle } from "./observer.js";
import { createPanel, type PanelHandle } from "./panel.js";
import { showPopup, type PopupHandle } from "./popup.js";
import { connectStream, type StreamHandle } from "./stream.js";
import type { DisplayBundle, PanelSettings } from "./types.js";

export interface OverlayOptions {
  /** Overlay mode observes the page's traffic; dashboard mode only renders
   * what the backend streams (for demos and replays). */
  mode?: "overlay" | "dashboard";
  root?: HTMLElement;
  openLink?: (url: string) => void;
  /** Transport seams (default to the page's own globals). */
  fetchFn?: typeof fetch;
  eventSourceFactory?: (url: string) => EventSource;
  observeTarget?: { fetch?: typeof fetch; XMLHttpRequest?: typeof XMLHttpRequest };
}

export interface Overlay {
  panel: PanelHandle;
  client: ApiClient;
  handleBundle(bundle: DisplayBundle): void;
  dispose(): void;
}

/** Wire the full companion UI: panel, popup lifecycle, update stream, and
 * (in overlay mode) host-traffic observation. All numbers rendered come
 * from backend bundles — nothing is recomputed client-side. */
export async function startOverlay(
  settings: PanelSettings,
  options: OverlayOptions = {},
): Promise<Overlay> {
  const root = options.root ?? document.body;
  const openLink = options.openLink ?? ((url: string) => window.open(url, "_blank"));
  const client = new ApiClient(settings, options.fetchFn);

  let popup: PopupHandle | null = null;
  let suppressReopen = false; // dismissed locally, waiting for the backend to agree

  const panel = createPanel(root, {
    onReadMore() {
      void client.postUiEvent("readmore_clicked");
      openLink(lastBundle?.read_more_url ?? "");
    },
  });

  let lastBundle: DisplayBundle | null = null;

  const handleBundle = (bundle: DisplayBundle) => {
    lastBundle = bundle;
    panel.update(bundle);
    if (bundle.popup === null) {
      suppressReopen = false;
      if (popup?.open) popup.close();
      popup = null;
      return;
    }
    if (popup?.open || suppressReopen) return;
    popup = showPopup(root, bundle.popup, {
      onDismiss() {
        suppressReopen = true;
        popup = null;
        void client.postUiEvent("popup_closed");
      },
      onReadMore(url) {
        void client.postUiEvent("readmore_clicked");
        openLink(url);
      },
    });
  };

  // Seed from a direct read, then follow the stream.
  try {
    handleBundle(await client.getState());
    panel.setConnected(true);
  } catch {
    panel.setConnected(false);
  }

  const stream: StreamHandle = connectStream(
    settings,
    {
      onBundle: handleBundle,
      onStatus: (connected) => panel.setConnected(connected),
    },
    options.eventSourceFactory,
  );

  let observer: ObserverHandle | null = null;
  if ((options.mode ?? "overlay") === "overlay") {
    const config = await client.getConfig();
    observer = observeHostTraffic(
      client,
      settings.userId,
      { urlPattern: config.url_pattern, ignoreSubstrings: config.ignore_substrings },
      options.observeTarget ?? globalThis,
    );
  }

  return {
    panel,
    client,
    handleBundle,
    dispose() {
      stream.close();
      observer?.stop();
      panel.dispose();
      popup?.close();
      client.dispose();
    },
  };
}
