// Limit-rule editing: local validation gates submission, the server is the
// arbiter, and the new version id is confirmed only by the journal event
// (no optimistic commit).

import { ApiError, ServiceClient } from "./api.js";
import type { FleetStore } from "./state.js";
import type { LimitRulePayload, Severity } from "./types.js";

export interface PendingEdit {
  asset: string;
  channelKind: string;
  lower: number | null;
  upper: number | null;
  severity: Severity;
}

export type EditValidation = { valid: true } | { valid: false; reason: string };

export function validateEdit(edit: PendingEdit): EditValidation {
  if (!edit.asset) return { valid: false, reason: "asset required" };
  if (!edit.channelKind) return { valid: false, reason: "channel kind required" };
  if (edit.lower === null && edit.upper === null) {
    return { valid: false, reason: "at least one bound required" };
  }
  if (edit.lower !== null && edit.upper !== null && !(edit.lower < edit.upper)) {
    return { valid: false, reason: "lower bound must be below upper bound" };
  }
  return { valid: true };
}

export type SubmitResult =
  | { ok: true; versionId: string; confirmed: boolean }
  | { ok: false; status: number; reason: string };

/**
 * PUT the edit; on acceptance wait for the matching rule-change journal
 * event before reporting the version id as confirmed. On rejection the
 * caller's draft stays untouched and the server reason is surfaced
 * verbatim.
 */
export async function submitLimitEdit(
  client: ServiceClient,
  store: FleetStore,
  edit: PendingEdit,
  opts: { author?: string; confirmTimeoutMs?: number; pollMs?: number } = {},
): Promise<SubmitResult> {
  const validation = validateEdit(edit);
  if (!validation.valid) {
    return { ok: false, status: 0, reason: validation.reason };
  }
  const payload: LimitRulePayload = {
    channel_kind: edit.channelKind,
    lower: edit.lower,
    upper: edit.upper,
    severity: edit.severity,
    author: opts.author ?? "console",
  };
  let versionId: string;
  try {
    const response = await client.putLimitRule(edit.asset, payload);
    versionId = response.version_id;
  } catch (err) {
    if (err instanceof ApiError) {
      return { ok: false, status: err.status, reason: err.reason };
    }
    throw err;
  }
  const timeout = opts.confirmTimeoutMs ?? 3000;
  const poll = opts.pollMs ?? 25;
  const deadline = Date.now() + timeout;
  while (Date.now() < deadline) {
    if (store.latestRuleVersion(edit.asset) === versionId) {
      return { ok: true, versionId, confirmed: true };
    }
    await new Promise((resolve) => setTimeout(resolve, poll));
  }
  return { ok: true, versionId, confirmed: false };
}
