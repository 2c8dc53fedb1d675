export { ApiClient } from "./api.js";
export { matchesFilter, observeHostTraffic } from "./observer.js";
export { createPanel, humanSentence } from "./panel.js";
export { showPopup } from "./popup.js";
export { connectStream } from "./stream.js";
export { startOverlay } from "./main.js";
export type {
  DisplayBundle,
  HumanReading,
  PanelSettings,
  PopupPayload,
  PublicConfig,
  TransactionReport,
  UiEventKind,
} from "./types.js";
