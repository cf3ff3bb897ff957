// Browser bootstrap: wire the API client, event stream, store, and views to
// the page sections. Mutations only via the API; views update only from
// journal events.

import { ApiError, ServiceClient } from "./api.js";
import { submitLimitEdit, validateEdit, type PendingEdit } from "./edit.js";
import { EventStream } from "./events.js";
import { FleetStore } from "./state.js";
import {
  renderAnomalyQueue,
  renderBanner,
  renderDigest,
  renderFleet,
  renderSparkline,
} from "./views.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function toast(message: string): void {
  const box = el("toasts");
  const item = document.createElement("div");
  item.className = "toast";
  item.textContent = message;
  box.appendChild(item);
  setTimeout(() => item.remove(), 5000);
}

async function refreshSparklines(client: ServiceClient, asset: string) {
  try {
    const health = await client.assetHealth(asset);
    const panel = el("sparklines");
    panel.innerHTML =
      `<h3>${asset}</h3>` +
      Object.entries(health.channels)
        .map(
          ([cid, chan]) =>
            `<div class="chan"><span>${cid} (${chan.health})</span>${renderSparkline(chan)}</div>`,
        )
        .join("");
  } catch {
    // keep the previous panel on transient errors
  }
}

async function boot() {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api") ?? "";
  const token = params.get("token") ?? undefined;
  const client = new ServiceClient({ baseUrl, token });
  const store = new FleetStore();

  const redraw = () => {
    el("banner").innerHTML = renderBanner(store.connection, store.stale);
    el("fleet").innerHTML = renderFleet(store.view());
    const open = store.view().flatMap((v) => v.openAnomalies);
    el("queue").innerHTML = renderAnomalyQueue(open, store.acknowledgedAnomalies());
  };

  const fleet = await client.fleet();
  store.loadFleet(fleet.assets);
  const anomalies = await client.anomalies(0);
  store.loadAnomalies(anomalies.anomalies);
  redraw();

  const stream = new EventStream(
    baseUrl,
    {
      onEvent: (event) => {
        const touched = store.apply(event);
        redraw();
        if (touched && (event.type === "anomaly" || event.type === "inspection")) {
          void refreshSparklines(client, touched);
        }
      },
      onState: (state) => {
        store.setConnection(state);
        redraw();
      },
    },
    {},
    fleet.cursor,
  );
  void stream.run();

  el("queue").addEventListener("click", async (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.matches("button.ack")) return;
    const anomalyId = target.dataset.anomaly!;
    try {
      await client.acknowledge(anomalyId, "console");
      // row moves to the acknowledged section when the ack event arrives
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        toast("already acknowledged elsewhere; refreshing");
      } else if (err instanceof ApiError && err.status === 404) {
        toast("anomaly no longer exists; refreshing");
      } else {
        toast(String(err));
        return;
      }
      const fresh = await client.anomalies(0);
      store.loadAnomalies(fresh.anomalies);
      redraw();
    }
  });

  (el("edit-form") as HTMLFormElement).addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const data = new FormData(form);
    const num = (name: string) => {
      const raw = String(data.get(name) ?? "").trim();
      return raw === "" ? null : Number(raw);
    };
    const edit: PendingEdit = {
      asset: String(data.get("asset") ?? ""),
      channelKind: String(data.get("channel_kind") ?? ""),
      lower: num("lower"),
      upper: num("upper"),
      severity: (data.get("severity") as PendingEdit["severity"]) ?? "warning",
    };
    const validation = validateEdit(edit);
    const status = el("edit-status");
    if (!validation.valid) {
      status.textContent = `invalid: ${validation.reason}`;
      return;
    }
    status.textContent = "submitting...";
    const result = await submitLimitEdit(client, store, edit);
    if (result.ok) {
      status.textContent = result.confirmed
        ? `accepted: version ${result.versionId}`
        : `accepted (version ${result.versionId}), awaiting journal confirmation`;
      form.reset();
    } else {
      // server rejection verbatim; the draft fields stay as typed
      status.textContent = `rejected by server: ${result.reason}`;
    }
  });

  (el("digest-form") as HTMLFormElement).addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    const period = (data.get("period") as "weekly" | "monthly") ?? "weekly";
    try {
      const { digest } = await client.digest(period, Date.now());
      el("digest").innerHTML = renderDigest(digest);
    } catch (err) {
      el("digest").textContent = String(err);
    }
  });

  // live edit validation: the submit button stays disabled while invalid
  const editForm = el("edit-form") as HTMLFormElement;
  const submitBtn = editForm.querySelector("button[type=submit]") as HTMLButtonElement;
  editForm.addEventListener("input", () => {
    const data = new FormData(editForm);
    const num = (name: string) => {
      const raw = String(data.get(name) ?? "").trim();
      return raw === "" ? null : Number(raw);
    };
    submitBtn.disabled = !validateEdit({
      asset: String(data.get("asset") ?? ""),
      channelKind: String(data.get("channel_kind") ?? ""),
      lower: num("lower"),
      upper: num("upper"),
      severity: "warning",
    }).valid;
  });
}

void boot();
