import type { PopupPayload } from "./types.js";
import { humanSentence } from "./panel.js";

export interface PopupHandlers {
  /** "Continue Using Anyway": must produce exactly one popup_closed event. */
  onDismiss(): void;
  /** "Read More": logs readmore_clicked and opens the link; modal stays. */
  onReadMore(url: string): void;
}

export interface PopupHandle {
  element: HTMLElement;
  close(): void;
  readonly open: boolean;
}

/** Show the blocking limit popup. The modal is not movable, sits above the
 * panel, and blocks interaction until "Continue Using Anyway" is clicked.
 * Both the standard metrics (kWh / liters) and the human-scale sentences
 * come verbatim from the backend payload. */
export function showPopup(
  root: HTMLElement,
  payload: PopupPayload,
  handlers: PopupHandlers,
): PopupHandle {
  const doc = root.ownerDocument;
  const overlay = doc.createElement("div");
  overlay.className = "ecogauge-popup-overlay";
  overlay.setAttribute("data-testid", "popup");
  overlay.style.position = "fixed";
  overlay.style.inset = "0";
  overlay.style.zIndex = "2147483601";

  overlay.innerHTML = `
    <div class="ecogauge-popup" role="dialog" aria-modal="true">
      <h2>Limit Reached</h2>
      <p data-testid="popup-standard">
        So far your queries have used ${payload.energy_kwh} kWh of energy
        and ${payload.water_liters} L of water.
      </p>
      <p data-testid="popup-energy">${humanSentence(payload.human_energy)}</p>
      <p data-testid="popup-water">${humanSentence(payload.human_water)}</p>
      <button class="ecogauge-popup-readmore" data-testid="popup-read-more">Read More!</button>
      <button class="ecogauge-popup-dismiss" data-testid="popup-dismiss">Continue Using Anyway</button>
    </div>
  `;
  root.appendChild(overlay);

  let open = true;
  const close = () => {
    if (!open) return;
    open = false;
    overlay.remove();
  };

  overlay
    .querySelector<HTMLButtonElement>('[data-testid="popup-dismiss"]')!
    .addEventListener("click", () => {
      if (!open) return; // double clicks never produce a second event
      close();
      handlers.onDismiss();
    });

  overlay
    .querySelector<HTMLButtonElement>('[data-testid="popup-read-more"]')!
    .addEventListener("click", () => {
      if (!open) return;
      handlers.onReadMore(payload.read_more_url);
    });

  return {
    element: overlay,
    close,
    get open() {
      return open;
    },
  };
}
