import type { DisplayBundle, HumanReading } from "./types.js";

const POSITION_KEY = "ecogauge.panel.position";
const SIZE_KEY = "ecogauge.panel.size";
const MIN_WIDTH = 180;
const MIN_HEIGHT = 220;

const UNIT_SENTENCES: Record<string, (formatted: string) => string> = {
  "lightbulb-hours": (f) => `Your queries have used the energy of a lightbulb left on for ${f} hours.`,
  "vehicle-miles": (f) => `Your queries have used the energy to drive an electric car ${f} miles.`,
  "cups": (f) => `Your queries have consumed ${f} cups of water.`,
  "bathtubs": (f) => `Your queries have consumed ${f} bathtubs of water.`,
  "hot-tubs": (f) => `Your queries have consumed ${f} hot tubs of water.`,
};

const UNIT_ICONS: Record<string, string> = {
  "lightbulb-hours": "\u{1F4A1}",
  "vehicle-miles": "\u{1F697}",
  "cups": "\u{1F964}",
  "bathtubs": "\u{1F6C1}",
  "hot-tubs": "\u{1F6C0}",
};

export function humanSentence(reading: HumanReading): string {
  const build = UNIT_SENTENCES[reading.unit];
  return build
    ? build(reading.formatted)
    : `Your queries total ${reading.formatted} ${reading.unit}.`;
}

export interface PanelHandlers {
  onReadMore(): void;
}

export interface PanelHandle {
  element: HTMLElement;
  update(bundle: DisplayBundle): void;
  setConnected(connected: boolean): void;
  position(): { x: number; y: number };
  dispose(): void;
}

interface Point {
  x: number;
  y: number;
}

function clampToViewport(point: Point, width: number, height: number, win: Window): Point {
  return {
    x: Math.min(Math.max(0, point.x), Math.max(0, win.innerWidth - width)),
    y: Math.min(Math.max(0, point.y), Math.max(0, win.innerHeight - height)),
  };
}

function loadJson<T>(storage: Storage, key: string): T | null {
  try {
    const raw = storage.getItem(key);
    return raw ? (JSON.parse(raw) as T) : null;
  } catch {
    return null;
  }
}

/** Build the always-visible side panel: Eco Score over its bracket image,
 * two human-scale sentences, pictogram rows, and a Read More button. The
 * panel is draggable by its header (never past the viewport edge, position
 * persisted) and resizable by its corner handle. */
export function createPanel(
  root: HTMLElement,
  handlers: PanelHandlers,
  win: Window = window,
  storage: Storage = win.localStorage,
): PanelHandle {
  const doc = root.ownerDocument;
  const panel = doc.createElement("div");
  panel.className = "ecogauge-panel";
  panel.setAttribute("data-testid", "panel");
  panel.style.position = "fixed";
  panel.style.zIndex = "2147483600";

  panel.innerHTML = `
    <div class="ecogauge-header" data-testid="drag-handle">
      <span class="ecogauge-title">Eco Score</span>
      <span class="ecogauge-status" data-testid="status"></span>
    </div>
    <div class="ecogauge-bracket" data-testid="bracket">
      <span class="ecogauge-score" data-testid="score"></span>
    </div>
    <p class="ecogauge-sentence" data-testid="energy-sentence"></p>
    <div class="ecogauge-pictograms" data-testid="energy-pictograms"></div>
    <p class="ecogauge-sentence" data-testid="water-sentence"></p>
    <div class="ecogauge-pictograms" data-testid="water-pictograms"></div>
    <button class="ecogauge-readmore" data-testid="read-more">Read More</button>
    <div class="ecogauge-resize" data-testid="resize-handle"></div>
  `;
  root.appendChild(panel);

  const query = <T extends HTMLElement>(testId: string): T =>
    panel.querySelector<T>(`[data-testid="${testId}"]`)!;

  query("read-more").addEventListener("click", () => handlers.onReadMore());

  // Geometry: restore persisted position/size, clamped into the viewport.
  const size = loadJson<{ w: number; h: number }>(storage, SIZE_KEY)
    ?? { w: 260, h: 360 };
  let width = Math.max(MIN_WIDTH, size.w);
  let height = Math.max(MIN_HEIGHT, size.h);
  const saved = loadJson<Point>(storage, POSITION_KEY)
    ?? { x: win.innerWidth - width - 16, y: 16 };
  let position = clampToViewport(saved, width, height, win);

  const applyGeometry = () => {
    panel.style.left = `${position.x}px`;
    panel.style.top = `${position.y}px`;
    panel.style.width = `${width}px`;
    panel.style.height = `${height}px`;
  };
  applyGeometry();

  const persist = () => {
    storage.setItem(POSITION_KEY, JSON.stringify(position));
    storage.setItem(SIZE_KEY, JSON.stringify({ w: width, h: height }));
  };

  // Dragging by the header; pointer capture keeps the drag alive when the
  // cursor outruns the panel.
  let dragStart: { pointer: Point; panel: Point } | null = null;
  const handle = query("drag-handle");
  handle.addEventListener("pointerdown", (event: PointerEvent) => {
    dragStart = { pointer: { x: event.clientX, y: event.clientY }, panel: position };
    handle.setPointerCapture?.(event.pointerId);
  });
  handle.addEventListener("pointermove", (event: PointerEvent) => {
    if (!dragStart) return;
    position = clampToViewport(
      {
        x: dragStart.panel.x + event.clientX - dragStart.pointer.x,
        y: dragStart.panel.y + event.clientY - dragStart.pointer.y,
      },
      width,
      height,
      win,
    );
    applyGeometry();
  });
  handle.addEventListener("pointerup", () => {
    if (!dragStart) return;
    dragStart = null;
    persist();
  });

  // Corner resize; the panel never grows past the viewport edge.
  let resizeStart: { pointer: Point; w: number; h: number } | null = null;
  const corner = query("resize-handle");
  corner.addEventListener("pointerdown", (event: PointerEvent) => {
    resizeStart = { pointer: { x: event.clientX, y: event.clientY }, w: width, h: height };
    corner.setPointerCapture?.(event.pointerId);
  });
  corner.addEventListener("pointermove", (event: PointerEvent) => {
    if (!resizeStart) return;
    width = Math.max(
      MIN_WIDTH,
      Math.min(resizeStart.w + event.clientX - resizeStart.pointer.x, win.innerWidth - position.x),
    );
    height = Math.max(
      MIN_HEIGHT,
      Math.min(resizeStart.h + event.clientY - resizeStart.pointer.y, win.innerHeight - position.y),
    );
    applyGeometry();
  });
  corner.addEventListener("pointerup", () => {
    if (!resizeStart) return;
    resizeStart = null;
    persist();
  });

  const renderPictograms = (row: HTMLElement, reading: HumanReading) => {
    row.textContent = "";
    const icon = UNIT_ICONS[reading.unit] ?? "■";
    for (let i = 0; i < reading.pictogram_count; i += 1) {
      const pictogram = doc.createElement("span");
      pictogram.className = "ecogauge-pictogram";
      pictogram.textContent = icon;
      row.appendChild(pictogram);
    }
  };

  return {
    element: panel,
    update(bundle: DisplayBundle) {
      query("score").textContent = String(bundle.eco_score);
      const bracket = query("bracket");
      bracket.dataset.bracket = String(bundle.image_bracket);
      bracket.className = `ecogauge-bracket ecogauge-bracket-${bundle.image_bracket}`;
      query("energy-sentence").textContent = humanSentence(bundle.energy);
      query("water-sentence").textContent = humanSentence(bundle.water);
      renderPictograms(query("energy-pictograms"), bundle.energy);
      renderPictograms(query("water-pictograms"), bundle.water);
    },
    setConnected(connected: boolean) {
      const status = query("status");
      status.textContent = connected ? "live" : "reconnecting…";
      status.dataset.connected = String(connected);
    },
    position() {
      return { ...position };
    },
    dispose() {
      panel.remove();
    },
  };
}
