// Payload shapes of the monitoring service API (v1).

export type Severity = "advisory" | "warning" | "critical";

export type AssetStatus =
  | "nominal"
  | "advisory"
  | "warning"
  | "critical"
  | "sensor-fault"
  | "paused";

export interface FleetEntry {
  asset: string;
  status: AssetStatus;
  open_anomalies: number;
  next_inspection_due: number;
}

export interface AnomalyRow {
  anomaly_id: string;
  asset: string;
  method: "trend" | "limit" | "pattern" | "statistical";
  severity: Severity;
  detected_at: number;
  predicted_failure_at: number | null;
  evidence: string;
  acknowledged: boolean;
  ack_author?: string | null;
  ack_at?: number | null;
}

export interface ChannelHealth {
  sensor: string;
  kind: string;
  health: "healthy" | "suspect" | "faulty";
  recent: Array<[number, number]>;
}

export interface AssetHealth {
  asset: string;
  status: AssetStatus;
  detection_enabled: boolean;
  next_inspection_due: number;
  inspection_interval_hours: number;
  open_anomalies: AnomalyRow[];
  channels: Record<string, ChannelHealth>;
}

export interface JournalEvent {
  cursor: number;
  ts: number;
  type: string;
  data: Record<string, any>;
}

export interface LimitRulePayload {
  channel_kind: string;
  lower?: number | null;
  upper?: number | null;
  severity?: Severity;
  author?: string;
}

export interface Digest {
  v: number;
  period: "weekly" | "monthly";
  range: { start: number; end: number };
  anomaly_counts: Record<Severity, number>;
  assets: Record<string, unknown>;
  open_anomalies: string[];
  open_responses: string[];
  sensor_faults: Array<Record<string, unknown>>;
}
