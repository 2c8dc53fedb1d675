import type { ApiClient } from "./api.js";

export interface TrafficFilter {
  urlPattern: string;
  ignoreSubstrings: string[];
}

/** Mirror of the backend's detection predicate, applied only to decide what
 * to *report* — the backend classifies again and is the source of truth.
 * Bodies are never inspected. */
export function matchesFilter(
  method: string,
  url: string,
  status: number,
  filter: TrafficFilter,
): boolean {
  if (method.toUpperCase() !== "POST" || status !== 200) return false;
  let path: string;
  try {
    path = new URL(url, globalThis.location?.href ?? "http://localhost/").pathname;
  } catch {
    return false;
  }
  if (!path.startsWith(filter.urlPattern)) return false;
  return !filter.ignoreSubstrings.some((needle) => url.includes(needle));
}

export interface ObserverHandle {
  stop(): void;
}

/** Watch the host page's fetch and XHR traffic and report each completed
 * matching transaction to the backend (ordered, buffered while offline). */
export function observeHostTraffic(
  client: ApiClient,
  userId: string,
  filter: TrafficFilter,
  target: { fetch?: typeof fetch; XMLHttpRequest?: typeof XMLHttpRequest } = globalThis,
): ObserverHandle {
  const report = (method: string, url: string, status: number) => {
    if (!matchesFilter(method, url, status, filter)) return;
    client.reportTransaction({
      user_id: userId,
      method: method.toUpperCase(),
      url,
      status,
      observed_at: new Date().toISOString(),
    });
  };

  const originalFetch = target.fetch;
  if (originalFetch) {
    const wrapped: typeof fetch = async (input, init) => {
      const request = new Request(input as RequestInfo, init);
      const response = await originalFetch.call(target, input as RequestInfo, init);
      report(request.method, request.url, response.status);
      return response;
    };
    target.fetch = wrapped;
  }

  const OriginalXhr = target.XMLHttpRequest;
  let PatchedXhr: typeof XMLHttpRequest | undefined;
  if (OriginalXhr) {
    PatchedXhr = class extends OriginalXhr {
      private observedMethod = "";
      private observedUrl = "";

      open(method: string, url: string | URL, ...rest: unknown[]): void {
        this.observedMethod = method;
        this.observedUrl = String(url);
        // eslint-disable-next-line @typescript-eslint/no-explicit-any
        (super.open as any)(method, url, ...(rest.length ? rest : [true]));
      }

      send(body?: Document | XMLHttpRequestBodyInit | null): void {
        this.addEventListener("loadend", () => {
          if (this.status > 0) {
            report(this.observedMethod, this.observedUrl, this.status);
          }
        });
        super.send(body);
      }
    };
    target.XMLHttpRequest = PatchedXhr;
  }

  return {
    stop() {
      if (originalFetch) target.fetch = originalFetch;
      if (OriginalXhr) target.XMLHttpRequest = OriginalXhr;
    },
  };
}
