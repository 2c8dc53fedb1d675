/** JSON shapes received from the backend. The panel never recomputes any of
 * these numbers client-side: every string is rendered exactly as received. */

export interface HumanReading {
  quantity: string;
  unit: string;
  pictogram_count: number;
  formatted: string;
}

export interface PopupPayload {
  energy_kwh: string;
  water_liters: string;
  human_energy: HumanReading;
  human_water: HumanReading;
  read_more_url: string;
}

export interface DisplayBundle {
  user_id: string;
  eco_score: number;
  image_bracket: number;
  energy: HumanReading;
  water: HumanReading;
  energy_kwh_text: string;
  water_liters_text: string;
  query_count: number;
  popup: PopupPayload | null;
  read_more_url: string;
  generated_at: string;
}

export interface PublicConfig {
  resource_profile: string;
  popup_limit: number;
  popup_mode: string;
  url_pattern: string;
  ignore_substrings: string[];
  read_more_url: string;
}

export interface TransactionReport {
  user_id: string;
  method: string;
  url: string;
  status: number;
  observed_at: string;
  idempotency_key?: string;
}

export type UiEventKind = "popup_closed" | "readmore_clicked";

export interface PanelSettings {
  baseUrl: string;
  userId: string;
  authToken?: string;
}
