"""HTTP API: auth, command endpoints, digests, and the event stream."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from cbmengine.config import ServiceConfig
from cbmengine.detection import LimitRule, Severity
from cbmengine.engine import MonitorEngine
from cbmengine.service import create_app
from cbmengine.store import FrameStore
from cbmengine.units import hours_to_ms
from cbmengine.wire import TelemetryFrame, encode_frame

from conftest import make_scenario

TOKEN = "test-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}


@pytest.fixture
def rig(tmp_path):
    store = FrameStore(tmp_path / "data")
    engine = MonitorEngine(store, origin_ms=0)
    scenario = make_scenario(
        n_assets=2, gain=0.0, onset_base=300.0, pf_hours=50.0, horizon_hours=400.0
    )
    engine.configure_from_scenario(scenario)
    config = ServiceConfig(token=TOKEN, data_dir=str(tmp_path / "data"))
    app = create_app(engine, config)
    with TestClient(app) as client:
        yield engine, app, client
    store.close()


def breach_asset(engine, asset="A000"):
    engine.update_limit_rule(
        asset,
        LimitRule(asset=asset, channel_kind="point-temperature", upper=60.0,
                  severity_on_breach=Severity.CRITICAL),
        "alice",
        hours_to_ms(0.5),
    )
    now = int(time.time() * 1000)
    for i in range(6):
        ts = now - (6 - i) * 60_000
        frame = TelemetryFrame(1, asset, f"{asset}.temp", "point-temperature", ts, 70.0, "degC", i)
        engine.ingest_line(encode_frame(frame), ts)
    return engine.run_inspections(now)


class TestAssets:
    def test_list_assets(self, rig):
        engine, app, client = rig
        body = client.get("/assets").json()
        assert body["v"] == 1
        assert [a["asset"] for a in body["assets"]] == ["A000", "A001"]
        assert all(a["status"] == "nominal" for a in body["assets"])

    def test_asset_health_includes_sparkline(self, rig):
        engine, app, client = rig
        breach_asset(engine)
        body = client.get("/assets/A000/health").json()
        assert body["status"] == "critical"
        assert body["channels"]["temp"]["recent"]
        assert body["open_anomalies"]

    def test_unknown_asset_404(self, rig):
        _, _, client = rig
        assert client.get("/assets/nope/health").status_code == 404


class TestLimitRules:
    def test_put_requires_token(self, rig):
        _, _, client = rig
        r = client.put(
            "/assets/A000/rules/limits",
            json={"channel_kind": "point-temperature", "upper": 75.0},
        )
        assert r.status_code == 401

    def test_put_and_version_history(self, rig):
        _, _, client = rig
        r = client.put(
            "/assets/A000/rules/limits",
            json={"channel_kind": "point-temperature", "upper": 75.0, "author": "zoe"},
            headers=AUTH,
        )
        assert r.status_code == 200
        version_id = r.json()["version_id"]
        versions = client.get("/assets/A000/rules/limits").json()["versions"]
        assert versions[-1]["version_id"] == version_id
        assert versions[-1]["author"] == "zoe"

    def test_inverted_bounds_rejected(self, rig):
        _, _, client = rig
        r = client.put(
            "/assets/A000/rules/limits",
            json={"channel_kind": "point-temperature", "lower": 80.0, "upper": 75.0},
            headers=AUTH,
        )
        assert r.status_code == 422
        assert "error" in r.json()


class TestAnomalies:
    def test_list_ack_and_conflict(self, rig):
        engine, _, client = rig
        raised = breach_asset(engine)
        assert raised
        body = client.get("/anomalies").json()
        assert body["anomalies"]
        anomaly_id = body["anomalies"][0]["anomaly_id"]
        r = client.post(f"/anomalies/{anomaly_id}/ack", json={"author": "op"}, headers=AUTH)
        assert r.status_code == 200
        assert r.json()["anomaly"]["acknowledged"]
        r2 = client.post(f"/anomalies/{anomaly_id}/ack", json={"author": "op"}, headers=AUTH)
        assert r2.status_code == 409

    def test_ack_unknown_404(self, rig):
        _, _, client = rig
        assert client.post("/anomalies/nope/ack", json={}, headers=AUTH).status_code == 404

    def test_since_cursor_filters(self, rig):
        engine, _, client = rig
        breach_asset(engine)
        head = client.get("/anomalies").json()["cursor"]
        assert client.get(f"/anomalies?since={head}").json()["anomalies"] == []


class TestOverride:
    def test_force_faulty_then_status(self, rig):
        engine, _, client = rig
        r = client.post(
            "/assets/A000/override",
            json={
                "target": "sensor-health",
                "new_state": {"sensor": "A000.temp", "health": "faulty"},
                "author": "op",
                "reason": "bench check",
            },
            headers=AUTH,
        )
        assert r.status_code == 200
        status = client.get("/assets").json()["assets"][0]["status"]
        assert status == "sensor-fault"

    def test_empty_reason_422(self, rig):
        _, _, client = rig
        r = client.post(
            "/assets/A000/override",
            json={"target": "detection-enabled", "new_state": {"enabled": False},
                  "author": "op", "reason": ""},
            headers=AUTH,
        )
        assert r.status_code == 422

    def test_requires_token(self, rig):
        _, _, client = rig
        r = client.post(
            "/assets/A000/override",
            json={"target": "detection-enabled", "new_state": {"enabled": False},
                  "author": "op", "reason": "x"},
        )
        assert r.status_code == 401


class TestDigests:
    def test_weekly_digest_roundtrip(self, rig):
        engine, _, client = rig
        breach_asset(engine)
        end = int(time.time() * 1000)
        engine.origin_ms = end - 8 * 24 * 3_600_000  # cover the weekly range
        r = client.get("/digests", params={"period": "weekly", "end": end})
        assert r.status_code == 200
        digest = r.json()["digest"]
        assert digest["anomaly_counts"]["critical"] >= 1
        r2 = client.get("/digests", params={"period": "weekly", "end": end})
        assert r2.json()["digest"] == digest

    def test_uncovered_range_410(self, rig):
        engine, _, client = rig
        engine.origin_ms = int(time.time() * 1000)
        r = client.get("/digests", params={"period": "weekly", "end": int(time.time() * 1000)})
        assert r.status_code == 410


class TestConfig:
    def test_file_plus_env_overrides(self, tmp_path, monkeypatch):
        from cbmengine.config import load_config

        path = tmp_path / "service.yaml"
        path.write_text(
            "version: 1\nlisten: 127.0.0.1:9100\ntoken: from-file\n"
            "data_dir: /tmp/file-data\ninspection_fraction: 0.25\n"
        )
        cfg = load_config(str(path))
        assert cfg.listen == "127.0.0.1:9100"
        assert cfg.token == "from-file"
        assert cfg.inspection_fraction == 0.25

        monkeypatch.setenv("CBM_LISTEN", "0.0.0.0:9200")
        monkeypatch.setenv("CBM_TOKEN", "from-env")
        monkeypatch.setenv("CBM_DATA_DIR", "/tmp/env-data")
        cfg = load_config(str(path))
        assert cfg.listen == "0.0.0.0:9200"
        assert cfg.token == "from-env"
        assert cfg.data_dir == "/tmp/env-data"

    def test_defaults_without_file(self):
        from cbmengine.config import load_config

        cfg = load_config(None)
        assert cfg.http == "127.0.0.1:8080"
        assert cfg.token is None


def read_sse_events(response, stop_on=None, max_events=50):
    """Collect parsed SSE events from a streaming httpx response."""
    events = []
    event = {}
    for line in response.iter_lines():
        if line.startswith("id:"):
            event["id"] = int(line[3:].strip())
        elif line.startswith("event:"):
            event["event"] = line[6:].strip()
        elif line.startswith("data:"):
            event["data"] = json.loads(line[5:].strip())
        elif line == "" and event:
            events.append(event)
            if stop_on and event.get("event") == stop_on:
                return events
            if len(events) >= max_events:
                return events
            event = {}
    return events


@pytest.fixture
def live(tmp_path):
    """Real uvicorn server on an ephemeral port (SSE needs true streaming)."""
    import threading

    import uvicorn

    store = FrameStore(tmp_path / "data")
    engine = MonitorEngine(store, origin_ms=0)
    scenario = make_scenario(
        n_assets=2, gain=0.0, onset_base=300.0, pf_hours=50.0, horizon_hours=400.0
    )
    engine.configure_from_scenario(scenario)
    config = ServiceConfig(token=TOKEN, data_dir=str(tmp_path / "data"))
    app = create_app(engine, config)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield engine, f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)
    store.close()


class TestEventStream:
    def test_anomaly_streams_within_latency_budget(self, live):
        import threading

        import httpx

        engine, base = live
        t0 = time.perf_counter()

        def trigger():
            time.sleep(0.1)
            assert breach_asset(engine)

        thread = threading.Thread(target=trigger)
        with httpx.stream("GET", f"{base}/events", timeout=10.0) as response:
            assert response.status_code == 200
            thread.start()
            events = read_sse_events(response, stop_on="anomaly")
        latency = time.perf_counter() - t0
        thread.join()
        assert any(e.get("event") == "anomaly" for e in events)
        assert latency < 2.0, f"took {latency:.2f}s"

    def test_cursor_replays_backlog(self, live):
        import httpx

        engine, base = live
        breach_asset(engine)
        with httpx.stream(
            "GET", f"{base}/events", params={"cursor": 0}, timeout=10.0
        ) as response:
            events = read_sse_events(response, stop_on="anomaly")
        kinds = [e["event"] for e in events]
        assert "rule-change" in kinds  # journaled before the anomaly
        assert kinds[-1] == "anomaly"
        assert events == sorted(events, key=lambda e: e["id"])

    def test_last_event_id_header_resumes(self, live):
        import httpx

        from cbmengine.engine import OverrideCommand

        engine, base = live
        breach_asset(engine)
        head = engine.cursor
        engine.apply_override(
            OverrideCommand(
                "A001", "detection-enabled", {"enabled": False}, "op", "resume test",
                int(time.time() * 1000),
            )
        )
        with httpx.stream(
            "GET",
            f"{base}/events",
            headers={"Last-Event-ID": str(head)},
            timeout=10.0,
        ) as response:
            events = read_sse_events(response, stop_on="override")
        assert events and all(e["id"] > head for e in events)

    def test_expired_cursor_410(self, rig):
        engine, app, client = rig
        breach_asset(engine)
        while engine._events and engine._events[0]["cursor"] <= 2:
            engine._events.popleft()
        r = client.get("/events", params={"cursor": 0})
        assert r.status_code == 410
