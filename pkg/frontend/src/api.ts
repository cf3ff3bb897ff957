// Thin typed client for the monitoring service. Every mutation goes through
// here; the console never mutates state any other way.

import type {
  AnomalyRow,
  AssetHealth,
  Digest,
  FleetEntry,
  LimitRulePayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public reason: string,
  ) {
    super(`${status}: ${reason}`);
  }
}

export interface ApiOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: typeof fetch;
}

export class ServiceClient {
  private fetchImpl: typeof fetch;

  constructor(private opts: ApiOptions) {
    this.fetchImpl = opts.fetchImpl ?? fetch.bind(globalThis);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.opts.token) headers["Authorization"] = `Bearer ${this.opts.token}`;
    const response = await this.fetchImpl(`${this.opts.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let reason = response.statusText;
      try {
        const doc = await response.json();
        if (doc && typeof doc.error === "string") reason = doc.error;
      } catch {
        // leave the status text as the reason
      }
      throw new ApiError(response.status, reason);
    }
    return (await response.json()) as T;
  }

  async fleet(): Promise<{ cursor: number; assets: FleetEntry[] }> {
    const doc = await this.request<{ cursor: number; assets: FleetEntry[] }>(
      "GET",
      "/assets",
    );
    return doc;
  }

  assetHealth(asset: string): Promise<AssetHealth> {
    return this.request<AssetHealth>("GET", `/assets/${asset}/health`);
  }

  anomalies(since = 0): Promise<{ cursor: number; anomalies: AnomalyRow[] }> {
    return this.request("GET", `/anomalies?since=${since}`);
  }

  async putLimitRule(
    asset: string,
    rule: LimitRulePayload,
  ): Promise<{ version_id: string }> {
    return this.request("PUT", `/assets/${asset}/rules/limits`, rule);
  }

  async acknowledge(anomalyId: string, author: string): Promise<AnomalyRow> {
    const doc = await this.request<{ anomaly: AnomalyRow }>(
      "POST",
      `/anomalies/${anomalyId}/ack`,
      { author },
    );
    return doc.anomaly;
  }

  override(
    asset: string,
    target: string,
    newState: Record<string, unknown>,
    author: string,
    reason: string,
  ): Promise<{ applied: Record<string, unknown> }> {
    return this.request("POST", `/assets/${asset}/override`, {
      target,
      new_state: newState,
      author,
      reason,
    });
  }

  digest(period: "weekly" | "monthly", end: number): Promise<{ digest: Digest }> {
    return this.request("GET", `/digests?period=${period}&end=${end}`);
  }
}
