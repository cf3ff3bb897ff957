import { describe, expect, it, vi } from "vitest";

import { ServiceClient } from "../src/api.js";
import { submitLimitEdit, validateEdit, type PendingEdit } from "../src/edit.js";
import { FleetStore } from "../src/state.js";

const draft = (over: Partial<PendingEdit> = {}): PendingEdit => ({
  asset: "A1",
  channelKind: "point-temperature",
  lower: null,
  upper: 75,
  severity: "warning",
  ...over,
});

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), { status });
}

describe("validateEdit", () => {
  it("requires at least one bound", () => {
    expect(validateEdit(draft({ upper: null }))).toMatchObject({ valid: false });
  });

  it("rejects inverted bounds locally", () => {
    const v = validateEdit(draft({ lower: 80, upper: 75 }));
    expect(v).toMatchObject({ valid: false });
  });

  it("accepts a sane draft", () => {
    expect(validateEdit(draft())).toEqual({ valid: true });
  });
});

describe("submitLimitEdit", () => {
  it("confirms the version id only from the journal event", async () => {
    const store = new FleetStore();
    const fetchImpl = vi.fn(async () => jsonResponse(200, { version_id: "lim-000009" }));
    const client = new ServiceClient({
      baseUrl: "http://svc",
      token: "t",
      fetchImpl: fetchImpl as unknown as typeof fetch,
    });
    const pending = submitLimitEdit(client, store, draft(), {
      confirmTimeoutMs: 500,
      pollMs: 5,
    });
    // the journal event lands a moment later, as it would over SSE
    setTimeout(() => {
      store.apply({
        cursor: 1,
        ts: 1,
        type: "rule-change",
        data: { asset: "A1", version_id: "lim-000009" },
      });
    }, 20);
    const result = await pending;
    expect(result).toEqual({ ok: true, versionId: "lim-000009", confirmed: true });
  });

  it("reports unconfirmed acceptance when no journal event arrives", async () => {
    const store = new FleetStore();
    const fetchImpl = async () => jsonResponse(200, { version_id: "lim-000010" });
    const client = new ServiceClient({
      baseUrl: "http://svc",
      token: "t",
      fetchImpl: fetchImpl as unknown as typeof fetch,
    });
    const result = await submitLimitEdit(client, store, draft(), {
      confirmTimeoutMs: 30,
      pollMs: 5,
    });
    expect(result).toMatchObject({ ok: true, confirmed: false });
  });

  it("surfaces the server rejection and leaves the draft intact", async () => {
    const store = new FleetStore();
    const fetchImpl = async () =>
      jsonResponse(422, { error: "lower bound must be strictly below upper bound" });
    const client = new ServiceClient({
      baseUrl: "http://svc",
      token: "t",
      fetchImpl: fetchImpl as unknown as typeof fetch,
    });
    const edit = draft({ lower: 10, upper: 75 });  // locally valid, server rejects
    const result = await submitLimitEdit(client, store, edit, {
      confirmTimeoutMs: 10,
    });
    expect(result).toEqual({
      ok: false,
      status: 422,
      reason: "lower bound must be strictly below upper bound",
    });
    expect(edit).toEqual(draft({ lower: 10, upper: 75 })); // untouched
    expect(store.latestRuleVersion("A1")).toBeUndefined();
  });

  it("does not call the server for locally invalid edits", async () => {
    const store = new FleetStore();
    const fetchImpl = vi.fn();
    const client = new ServiceClient({
      baseUrl: "http://svc",
      fetchImpl: fetchImpl as unknown as typeof fetch,
    });
    const result = await submitLimitEdit(client, store, draft({ upper: null }));
    expect(result).toMatchObject({ ok: false, status: 0 });
    expect(fetchImpl).not.toHaveBeenCalled();
  });
});
