// Console state: a pure reducer over the service snapshot plus journal
// events. The console holds no authoritative state; everything shown here
// can be rebuilt from GET /assets + the journal, and the snapshot tests pin
// that derivation.

import type {
  AnomalyRow,
  AssetStatus,
  FleetEntry,
  JournalEvent,
  Severity,
} from "./types.js";
import type { ConnectionState } from "./events.js";

const SEVERITY_RANK: Record<Severity, number> = {
  critical: 0,
  warning: 1,
  advisory: 2,
};

export interface AssetView {
  asset: string;
  status: AssetStatus;
  openAnomalies: AnomalyRow[];
  nextInspectionDue: number | null;
  faultySensors: string[];
  paused: boolean;
}

export class FleetStore {
  private assets = new Map<
    string,
    {
      paused: boolean;
      nextDue: number | null;
      faulty: Set<string>;
    }
  >();
  private anomalies = new Map<string, AnomalyRow>();
  private ruleVersions = new Map<string, string>(); // asset -> latest version id
  connection: ConnectionState = "connecting";
  stale = false;

  loadFleet(entries: FleetEntry[]): void {
    for (const entry of entries) {
      this.ensure(entry.asset).nextDue = entry.next_inspection_due;
      if (entry.status === "paused") this.ensure(entry.asset).paused = true;
    }
  }

  loadAnomalies(rows: AnomalyRow[]): void {
    for (const row of rows) this.anomalies.set(row.anomaly_id, row);
  }

  private ensure(asset: string) {
    let state = this.assets.get(asset);
    if (!state) {
      state = { paused: false, nextDue: null, faulty: new Set() };
      this.assets.set(asset, state);
    }
    return state;
  }

  setConnection(state: ConnectionState): void {
    this.connection = state;
    if (state === "lost") this.stale = true;
    if (state === "live") this.stale = false;
  }

  latestRuleVersion(asset: string): string | undefined {
    return this.ruleVersions.get(asset);
  }

  /** Apply one journal event; returns the asset whose view changed, if any. */
  apply(event: JournalEvent): string | null {
    const data = event.data;
    switch (event.type) {
      case "anomaly": {
        this.anomalies.set(data.anomaly_id, {
          anomaly_id: data.anomaly_id,
          asset: data.asset,
          method: data.method,
          severity: data.severity,
          detected_at: data.detected_at,
          predicted_failure_at: data.predicted_failure_at ?? null,
          evidence: data.evidence ?? "",
          acknowledged: false,
        });
        this.ensure(data.asset);
        return data.asset;
      }
      case "ack": {
        const row = this.anomalies.get(data.anomaly_id);
        if (!row) return null;
        row.acknowledged = true;
        row.ack_author = data.author;
        row.ack_at = event.ts;
        return row.asset;
      }
      case "sensor-fault": {
        this.ensure(data.asset).faulty.add(data.sensor);
        return data.asset;
      }
      case "sensor-recovered": {
        this.ensure(data.asset).faulty.delete(data.sensor);
        return data.asset;
      }
      case "inspection": {
        this.ensure(data.asset).nextDue = data.next_due;
        return data.asset;
      }
      case "override": {
        const state = this.ensure(data.asset);
        if (data.target === "detection-enabled") {
          state.paused = data.new_state?.enabled === false;
        } else if (data.target === "sensor-health") {
          if (data.new_state?.health === "faulty") {
            state.faulty.add(data.new_state.sensor);
          } else if (data.new_state?.health === "healthy") {
            state.faulty.delete(data.new_state.sensor);
          }
        }
        return data.asset;
      }
      case "rule-change": {
        this.ruleVersions.set(data.asset, data.version_id);
        return data.asset;
      }
      default:
        return null;
    }
  }

  openAnomaliesFor(asset: string): AnomalyRow[] {
    return [...this.anomalies.values()]
      .filter((a) => a.asset === asset && !a.acknowledged)
      .sort((a, b) => SEVERITY_RANK[a.severity] - SEVERITY_RANK[b.severity]);
  }

  acknowledgedAnomalies(): AnomalyRow[] {
    return [...this.anomalies.values()]
      .filter((a) => a.acknowledged)
      .sort((a, b) => b.detected_at - a.detected_at);
  }

  /** Status precedence shared with the service: paused, then worst open
   * unacknowledged severity, then sensor-fault, else nominal. */
  statusOf(asset: string): AssetStatus {
    const state = this.assets.get(asset);
    if (!state) return "nominal";
    if (state.paused) return "paused";
    const open = this.openAnomaliesFor(asset);
    if (open.length > 0) return open[0].severity;
    if (state.faulty.size > 0) return "sensor-fault";
    return "nominal";
  }

  view(): AssetView[] {
    return [...this.assets.keys()].sort().map((asset) => {
      const state = this.assets.get(asset)!;
      return {
        asset,
        status: this.statusOf(asset),
        openAnomalies: this.openAnomaliesFor(asset),
        nextInspectionDue: state.nextDue,
        faultySensors: [...state.faulty].sort(),
        paused: state.paused,
      };
    });
  }
}
