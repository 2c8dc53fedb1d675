/** Test doubles: a scripted fake backend speaking the real HTTP interface.
 *
 * The per-count display strings are frozen goldens taken from the backend's
 * own acceptance-tested output (2.9 Wh / 17.0 mL profile, 10 W bulb, 240 mL
 * cup, popup every 7 queries), so these tests verify that the UI shows
 * backend strings verbatim rather than recomputing anything.
 */

import type { DisplayBundle, HumanReading, PopupPayload } from "../src/types.js";

export const ENERGY_FORMATTED = [
  "0.000", "0.290", "0.580", "0.870", "1.160", "1.450", "1.740", "2.030",
];
export const WATER_FORMATTED = [
  "0.000", "0.071", "0.142", "0.213", "0.283", "0.354", "0.425", "0.496",
];
export const POPUP_AT_7 = { energy_kwh: "0.020", water_liters: "0.119" };

export function reading(unit: string, formatted: string, pictograms = 0): HumanReading {
  return { quantity: formatted, unit, pictogram_count: pictograms, formatted };
}

export function makeBundle(overrides: Partial<DisplayBundle> = {}): DisplayBundle {
  return {
    user_id: "u",
    eco_score: 100,
    image_bracket: 1,
    energy: reading("lightbulb-hours", "0.000"),
    water: reading("cups", "0.000"),
    energy_kwh_text: "0.000",
    water_liters_text: "0.000",
    query_count: 0,
    popup: null,
    read_more_url: "https://example.org/impact",
    generated_at: "2025-01-19T09:00:00.000Z",
    ...overrides,
  };
}

export interface LoggedUiEvent {
  user_id: string;
  kind: string;
}

/** A stand-in for the primary service: accepts the same routes, applies the
 * same detection predicate, and serves bundles from the golden table. */
export class FakeBackend {
  queryCount = 0;
  popupOpen = false;
  uiEvents: LoggedUiEvent[] = [];
  transactions: unknown[] = [];
  online = true;

  readonly fetch: typeof fetch = async (input, init) => {
    if (!this.online) throw new TypeError("network unreachable");
    const request = new Request(input as RequestInfo, init);
    const url = new URL(request.url);
    if (request.method === "POST" && url.pathname === "/v1/events/transaction") {
      const body = (await request.json()) as { method: string; url: string; status: number };
      this.transactions.push(body);
      if (this.isQuery(body)) {
        this.queryCount += 1;
        if (this.queryCount % 7 === 0) this.popupOpen = true;
      }
      return this.json({ accepted: true, query: this.isQuery(body), duplicate: false });
    }
    if (request.method === "POST" && url.pathname === "/v1/events/ui") {
      const body = (await request.json()) as LoggedUiEvent;
      if (body.kind === "popup_closed") {
        if (!this.popupOpen) return this.json({ accepted: true, applied: false });
        this.popupOpen = false;
      }
      this.uiEvents.push(body);
      return this.json({ accepted: true, applied: true });
    }
    if (request.method === "GET" && url.pathname.startsWith("/v1/state/")) {
      return this.json(this.currentBundle());
    }
    if (request.method === "GET" && url.pathname === "/v1/config") {
      return this.json({
        resource_profile: "paper-figures",
        popup_limit: 7,
        popup_mode: "count",
        url_pattern: "/backend-api/conversation",
        ignore_substrings: ["init", "implicit"],
        read_more_url: "https://example.org/impact",
      });
    }
    return new Response("not found", { status: 404 });
  };

  private isQuery(body: { method: string; url: string; status: number }): boolean {
    return (
      body.method.toUpperCase() === "POST" &&
      body.status === 200 &&
      new URL(body.url).pathname.startsWith("/backend-api/conversation") &&
      !body.url.includes("init") &&
      !body.url.includes("implicit")
    );
  }

  private json(body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  }

  currentBundle(): DisplayBundle {
    const n = this.queryCount;
    const popup: PopupPayload | null = this.popupOpen
      ? {
          energy_kwh: POPUP_AT_7.energy_kwh,
          water_liters: POPUP_AT_7.water_liters,
          human_energy: reading("lightbulb-hours", ENERGY_FORMATTED[7], 2),
          human_water: reading("cups", WATER_FORMATTED[7], 0),
          read_more_url: "https://example.org/impact",
        }
      : null;
    return makeBundle({
      query_count: n,
      energy: reading("lightbulb-hours", ENERGY_FORMATTED[n] ?? "?", Math.floor(n * 0.29)),
      water: reading("cups", WATER_FORMATTED[n] ?? "?", 0),
      popup,
    });
  }
}

/** EventSource double: frames are pushed by the test. */
export class FakeEventSource {
  static instances: FakeEventSource[] = [];
  onopen: (() => void) | null = null;
  onerror: (() => void) | null = null;
  onmessage: ((event: MessageEvent) => void) | null = null;
  closed = false;

  constructor(public url: string) {
    FakeEventSource.instances.push(this);
  }

  push(data: unknown): void {
    this.onmessage?.({ data: JSON.stringify(data) } as MessageEvent);
  }

  close(): void {
    this.closed = true;
  }
}

export function pointerEvent(type: string, x: number, y: number): PointerEvent {
  const event = new MouseEvent(type, { clientX: x, clientY: y, bubbles: true });
  return event as unknown as PointerEvent;
}
