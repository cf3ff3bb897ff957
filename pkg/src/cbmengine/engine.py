"""Monitoring engine: the single-writer core behind the service and CLI.

Owns per-sensor ingest lanes, per-asset rules and inspection schedules, the
anomaly registry and response pipelines, and the journal. Every state change
(rule update, override, acknowledgement) is journaled before it takes
effect; replaying the journal reconstructs the configuration. Writes are
serialized through one lock; queries read immutable snapshots.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Tuple

import yaml

from .detection import (
    AnomalyEvent,
    AssetSnapshot,
    ChannelSnapshot,
    LimitRule,
    PatternPredicate,
    PatternRule,
    RuleSet,
    Severity,
    StatisticalConfig,
    evaluate,
)
from .ingest import (
    ChannelState,
    FrameOutcome,
    Health,
    process_frame,
)
from .reliability import WeibullModel
from .scheduler import (
    InspectionSchedule,
    ResponsePipeline,
    next_inspection,
    open_response,
)
from .simulator import AssetSpec, Scenario, sensor_id
from .store import FrameStore, RangeUnavailable
from .units import MS_PER_HOUR, hours_to_ms
from .wire import MalformedFrame, TelemetryFrame, decode_frame

ESCALATION_PERIOD_MS = 15 * 60 * 1000  # unacked criticals re-notify this often
EVENT_RETENTION = 100_000  # journal events kept addressable by cursor

RULES_SCHEMA_VERSION = 1


class ValidationFailed(Exception):
    """Command payload rejected; the message names the problem."""


class Unauthorized(Exception):
    """Missing or wrong bearer token."""


class NotFound(Exception):
    """Unknown asset or anomaly identifier."""


class AlreadyAcknowledged(Exception):
    """The anomaly was acknowledged earlier."""


class CursorExpired(Exception):
    """Event cursor points before the retained journal window."""


@dataclass(frozen=True)
class OverrideCommand:
    asset: str
    target: str  # sensor-health | detection-enabled | limit-rule | schedule
    new_state: Dict
    author: str
    reason: str
    at: int


@dataclass
class AnomalyRecord:
    event: AnomalyEvent
    acknowledged: bool = False
    ack_author: Optional[str] = None
    ack_at: Optional[int] = None
    last_notified_at: Optional[int] = None

    def as_dict(self) -> Dict:
        return {
            "anomaly_id": self.event.anomaly_id,
            "asset": self.event.asset,
            "method": self.event.method,
            "severity": self.event.severity.value,
            "detected_at": self.event.detected_at,
            "predicted_failure_at": self.event.predicted_failure_at,
            "evidence": self.event.evidence,
            "acknowledged": self.acknowledged,
            "ack_author": self.ack_author,
            "ack_at": self.ack_at,
        }


@dataclass
class _AssetState:
    spec: AssetSpec
    rules: RuleSet
    schedule: InspectionSchedule
    detection_enabled: bool = True
    origin_ms: int = 0
    event_log: Deque[Tuple[int, str, float]] = field(
        default_factory=lambda: deque(maxlen=1024)
    )
    limit_versions: List[Dict] = field(default_factory=list)


def anomaly_event_dict(event: AnomalyEvent) -> Dict:
    return {
        "anomaly_id": event.anomaly_id,
        "asset": event.asset,
        "method": event.method,
        "severity": event.severity.value,
        "detected_at": event.detected_at,
        "predicted_failure_at": event.predicted_failure_at,
        "evidence": event.evidence,
    }


class MonitorEngine:
    def __init__(
        self,
        store: FrameStore,
        *,
        staleness_hours: float = 24.0,
        inspection_fraction: float = 0.5,
        origin_ms: int = 0,
        notifier: Optional[Callable[[Dict], None]] = None,
    ):
        self.store = store
        self.staleness_hours = staleness_hours
        self.inspection_fraction = inspection_fraction
        self.origin_ms = origin_ms
        self.notifier = notifier
        self._lock = threading.RLock()
        self._assets: Dict[str, _AssetState] = {}
        self._channels: Dict[str, ChannelState] = {}
        self._sensor_asset: Dict[str, str] = {}
        self._anomalies: Dict[str, AnomalyRecord] = {}
        self._anomaly_order: List[str] = []
        self._responses: Dict[str, ResponsePipeline] = {}
        self._open_response_keys: Dict[Tuple[str, str, str], str] = {}
        self._events: Deque[Dict] = deque(maxlen=EVENT_RETENTION)
        self._cursor = 0
        self._rule_version_counter = 0
        self.stats = {"received": 0, "accepted": 0, "quarantined": 0, "substituted": 0}

    # -- configuration --------------------------------------------------

    def add_asset(
        self,
        spec: AssetSpec,
        rules: Optional[RuleSet] = None,
        *,
        fraction: Optional[float] = None,
        origin_ms: Optional[int] = None,
    ) -> None:
        with self._lock:
            start = self.origin_ms if origin_ms is None else origin_ms
            schedule = InspectionSchedule.create(
                spec.asset_id,
                spec.pf,
                start,
                fraction if fraction is not None else self.inspection_fraction,
            )
            self._assets[spec.asset_id] = _AssetState(
                spec=spec,
                rules=rules if rules is not None else RuleSet(),
                schedule=schedule,
                origin_ms=start,
            )
            for chan in spec.channels:
                sid = sensor_id(spec.asset_id, chan.channel_id)
                self._channels[sid] = ChannelState(sensor=sid)
                self._sensor_asset[sid] = spec.asset_id

    def configure_from_scenario(
        self,
        scenario: Scenario,
        rules_by_asset: Optional[Dict[str, RuleSet]] = None,
        *,
        fraction: Optional[float] = None,
    ) -> None:
        for asset in sorted(scenario.assets, key=lambda a: a.asset_id):
            self.add_asset(
                asset,
                (rules_by_asset or {}).get(asset.asset_id),
                fraction=fraction,
                origin_ms=scenario.start_ts_ms,
            )

    def assets(self) -> List[str]:
        return sorted(self._assets)

    # -- journal ----------------------------------------------------------

    def _journal(self, type_: str, now_ms: int, data: Dict) -> Dict:
        self._cursor += 1
        entry = {"cursor": self._cursor, "ts": now_ms, "type": type_, "data": data}
        self._events.append(entry)
        self.store.append_journal("journal", entry)
        return entry

    def events_after(self, cursor: int) -> List[Dict]:
        with self._lock:
            oldest = self._events[0]["cursor"] if self._events else self._cursor + 1
            if cursor + 1 < oldest:
                raise CursorExpired(f"cursor {cursor} predates retained events")
            return [e for e in self._events if e["cursor"] > cursor]

    @property
    def cursor(self) -> int:
        return self._cursor

    def _notify(self, now_ms: int, payload: Dict) -> None:
        entry = self._journal("notification", now_ms, payload)
        if self.notifier is not None:
            try:
                self.notifier(entry)
            except Exception:
                pass  # notification sinks must never break the command path

    # -- ingest -----------------------------------------------------------

    def ingest_line(self, line: bytes, now_ms: int) -> Optional[FrameOutcome]:
        with self._lock:
            self.stats["received"] += 1
            try:
                frame = decode_frame(line)
            except MalformedFrame as exc:
                self.stats["quarantined"] += 1
                self.store.quarantine(line, f"malformed: {exc}")
                return None
            return self._ingest(frame, line, now_ms)

    def ingest_frame(self, frame: TelemetryFrame, now_ms: int) -> FrameOutcome:
        from .wire import encode_frame

        with self._lock:
            self.stats["received"] += 1
            return self._ingest(frame, encode_frame(frame), now_ms)

    def _ingest(self, frame: TelemetryFrame, line: bytes, now_ms: int) -> FrameOutcome:
        state = self._channels.get(frame.sensor)
        if state is None:
            state = ChannelState(sensor=frame.sensor)
            self._channels[frame.sensor] = state
            self._sensor_asset.setdefault(frame.sensor, frame.asset)
        health_before = state.health
        outcome = process_frame(state, frame, now_ms, self.staleness_hours)
        if not outcome.accepted:
            self.stats["quarantined"] += 1
            self.store.quarantine(line, outcome.quarantine_reason or "quarantined")
            return outcome
        self.stats["accepted"] += 1
        if outcome.dropped:
            return outcome
        stored = frame if outcome.substitution is None else TelemetryFrame(
            schema_version=frame.schema_version,
            asset=frame.asset,
            sensor=frame.sensor,
            channel_kind=frame.channel_kind,
            ts=frame.ts,
            value=outcome.value,
            unit=frame.unit,
            seq=frame.seq,
        )
        self.store.append(stored, substitution=outcome.substitution)
        if outcome.substitution is not None:
            self.stats["substituted"] += 1
        asset_state = self._assets.get(frame.asset)
        if asset_state is not None:
            asset_state.event_log.append((frame.ts, frame.channel_kind, outcome.value))
        if outcome.fault_notice is not None:
            data = {
                "sensor": frame.sensor,
                "asset": frame.asset,
                "at": outcome.fault_notice.at,
                "consecutive_outliers": outcome.fault_notice.consecutive_outliers,
            }
            self._journal("sensor-fault", now_ms, data)
            self._notify(now_ms, {"kind": "sensor-fault", **data})
        elif health_before == Health.FAULTY and state.health == Health.HEALTHY:
            self._journal(
                "sensor-recovered", now_ms, {"sensor": frame.sensor, "asset": frame.asset}
            )
        return outcome

    # -- inspection / detection -------------------------------------------

    def snapshot(self, asset_id: str, now_ms: int) -> AssetSnapshot:
        state = self._assets.get(asset_id)
        if state is None:
            raise NotFound(f"unknown asset {asset_id!r}")
        channels = []
        for chan in sorted(state.spec.channels, key=lambda c: c.channel_id):
            sid = sensor_id(asset_id, chan.channel_id)
            cstate = self._channels[sid]
            channels.append(
                ChannelSnapshot(
                    channel_id=chan.channel_id,
                    sensor=sid,
                    kind=chan.kind,
                    health=cstate.health,
                    points=tuple(cstate.window),
                )
            )
        return AssetSnapshot(
            asset=asset_id,
            now=now_ms,
            channels=tuple(channels),
            events=tuple(state.event_log),
            age_hours=(now_ms - state.origin_ms) / MS_PER_HOUR,
            pf=state.spec.pf,
            inspection_interval_hours=state.schedule.interval_hours,
        )

    def run_inspections(self, now_ms: int) -> List[AnomalyEvent]:
        """Fire every due schedule once; journal anomalies and open responses."""
        raised: List[AnomalyEvent] = []
        with self._lock:
            for asset_id in sorted(self._assets):
                state = self._assets[asset_id]
                if state.schedule.next_due > now_ms:
                    continue
                state.schedule = next_inspection(state.schedule, now_ms)
                self._journal(
                    "inspection",
                    now_ms,
                    {"asset": asset_id, "next_due": state.schedule.next_due},
                )
                if not state.detection_enabled:
                    continue
                snap = self.snapshot(asset_id, now_ms)
                for event in evaluate(snap, state.rules):
                    raised.append(event)
                    self._register_anomaly(event, state, now_ms)
        return raised

    def _register_anomaly(
        self, event: AnomalyEvent, state: _AssetState, now_ms: int
    ) -> None:
        record = AnomalyRecord(event=event)
        self._anomalies[event.anomaly_id] = record
        self._anomaly_order.append(event.anomaly_id)
        self.store.append_journal("anomalies", anomaly_event_dict(event))
        self._journal("anomaly", now_ms, anomaly_event_dict(event))
        if event.severity in (Severity.WARNING, Severity.CRITICAL):
            record.last_notified_at = now_ms
            self._notify(now_ms, {"kind": "anomaly", **anomaly_event_dict(event)})
        # Key on everything after asset:timestamp, i.e. method:channel:rule.
        key = (event.asset, ":".join(event.anomaly_id.split(":")[2:]), event.method)
        open_id = self._open_response_keys.get(key)
        if open_id is None or self._responses[open_id].stage == "completed":
            pipeline = open_response(
                event, now_ms, pf=state.spec.pf, registry=self._responses
            )
            self._open_response_keys[key] = event.anomaly_id
            self._journal(
                "response-opened",
                now_ms,
                {
                    "response_id": pipeline.response_id,
                    "anomaly_id": event.anomaly_id,
                    "asset": event.asset,
                    "deadline": pipeline.deadline,
                },
            )

    def advance_response_stage(self, anomaly_id: str, now_ms: int) -> ResponsePipeline:
        from .scheduler import advance_response

        with self._lock:
            pipeline = self._responses.get(anomaly_id)
            if pipeline is None:
                raise NotFound(f"no response for anomaly {anomaly_id!r}")
            advance_response(pipeline, now_ms)
            self._journal(
                "response-advanced",
                now_ms,
                {
                    "response_id": pipeline.response_id,
                    "anomaly_id": anomaly_id,
                    "stage": pipeline.stage,
                    "overdue": pipeline.overdue,
                },
            )
            return pipeline

    # -- operator commands --------------------------------------------------

    def update_limit_rule(
        self, asset_id: str, rule: LimitRule, author: str, now_ms: int
    ) -> str:
        """Journal a new rule version; it governs from the next inspection."""
        with self._lock:
            state = self._assets.get(asset_id)
            if state is None:
                raise NotFound(f"unknown asset {asset_id!r}")
            self._rule_version_counter += 1
            version_id = f"lim-{self._rule_version_counter:06d}"
            record = {
                "version_id": version_id,
                "asset": asset_id,
                "author": author,
                "at": now_ms,
                "channel_kind": rule.channel_kind,
                "lower": rule.lower,
                "upper": rule.upper,
                "severity": rule.severity_on_breach.value,
            }
            self._journal("rule-change", now_ms, record)
            self.store.append_journal("rule-changes", record)
            state.limit_versions.append(record)
            others = tuple(
                r for r in state.rules.limits if r.channel_kind != rule.channel_kind
            )
            state.rules = RuleSet(
                limits=others + (rule,),
                patterns=state.rules.patterns,
                statistical=state.rules.statistical,
                trend_window=state.rules.trend_window,
            )
            return version_id

    def limit_rule_versions(self, asset_id: str) -> List[Dict]:
        state = self._assets.get(asset_id)
        if state is None:
            raise NotFound(f"unknown asset {asset_id!r}")
        return list(state.limit_versions)

    def acknowledge(self, anomaly_id: str, author: str, now_ms: int) -> Dict:
        with self._lock:
            record = self._anomalies.get(anomaly_id)
            if record is None:
                raise NotFound(f"unknown anomaly {anomaly_id!r}")
            if record.acknowledged:
                raise AlreadyAcknowledged(anomaly_id)
            self._journal(
                "ack", now_ms, {"anomaly_id": anomaly_id, "author": author}
            )
            record.acknowledged = True
            record.ack_author = author
            record.ack_at = now_ms
            return record.as_dict()

    def apply_override(self, cmd: OverrideCommand) -> Dict:
        """Validate, journal, then apply; returns the applied state."""
        with self._lock:
            if not cmd.reason or not cmd.reason.strip():
                raise ValidationFailed("override reason must be non-empty")
            state = self._assets.get(cmd.asset)
            if state is None:
                raise NotFound(f"unknown asset {cmd.asset!r}")
            applied: Dict

            if cmd.target == "sensor-health":
                sensor = cmd.new_state.get("sensor")
                health = cmd.new_state.get("health")
                cstate = self._channels.get(sensor or "")
                if cstate is None:
                    raise ValidationFailed(f"unknown sensor {sensor!r}")
                if health not in (Health.HEALTHY.value, Health.FAULTY.value):
                    raise ValidationFailed("health must be 'healthy' or 'faulty'")
                self._journal_override(cmd)
                cstate.health = Health(health)
                cstate.consecutive_outliers = 0
                cstate.consecutive_ok = 0
                applied = {"sensor": sensor, "health": cstate.health.value}
            elif cmd.target == "detection-enabled":
                enabled = cmd.new_state.get("enabled")
                if not isinstance(enabled, bool):
                    raise ValidationFailed("enabled must be a boolean")
                self._journal_override(cmd)
                state.detection_enabled = enabled
                if enabled and state.schedule.next_due < cmd.at:
                    state.schedule = InspectionSchedule.create(
                        cmd.asset, state.spec.pf, cmd.at, state.schedule.fraction
                    )
                applied = {
                    "detection_enabled": enabled,
                    "next_due": state.schedule.next_due,
                }
            elif cmd.target == "limit-rule":
                try:
                    rule = LimitRule(
                        asset=cmd.asset,
                        channel_kind=cmd.new_state["channel_kind"],
                        lower=cmd.new_state.get("lower"),
                        upper=cmd.new_state.get("upper"),
                        severity_on_breach=Severity(
                            cmd.new_state.get("severity", "warning")
                        ),
                    )
                except (KeyError, ValueError) as exc:
                    raise ValidationFailed(str(exc)) from exc
                self._journal_override(cmd)
                version = self.update_limit_rule(cmd.asset, rule, cmd.author, cmd.at)
                applied = {"version_id": version}
            elif cmd.target == "schedule":
                fraction = cmd.new_state.get("fraction")
                try:
                    from .scheduler import inspection_interval as _interval

                    _interval(state.spec.pf, float(fraction))
                except Exception as exc:
                    raise ValidationFailed(f"bad fraction: {exc}") from exc
                self._journal_override(cmd)
                state.schedule = InspectionSchedule.create(
                    cmd.asset, state.spec.pf, cmd.at, float(fraction)
                )
                applied = {
                    "fraction": float(fraction),
                    "next_due": state.schedule.next_due,
                }
            else:
                raise ValidationFailed(f"unknown override target {cmd.target!r}")
            return applied

    def _journal_override(self, cmd: OverrideCommand) -> None:
        record = {
            "asset": cmd.asset,
            "target": cmd.target,
            "new_state": cmd.new_state,
            "author": cmd.author,
            "reason": cmd.reason,
            "at": cmd.at,
        }
        self._journal("override", cmd.at, record)
        self.store.append_journal("overrides", record)

    # -- queries ------------------------------------------------------------

    def anomalies_since(self, since_cursor: int = 0) -> List[Dict]:
        with self._lock:
            out = []
            for entry in self._events:
                if entry["type"] == "anomaly" and entry["cursor"] > since_cursor:
                    record = self._anomalies.get(entry["data"]["anomaly_id"])
                    if record is not None:
                        out.append({"cursor": entry["cursor"], **record.as_dict()})
            return out

    def anomaly(self, anomaly_id: str) -> AnomalyRecord:
        record = self._anomalies.get(anomaly_id)
        if record is None:
            raise NotFound(f"unknown anomaly {anomaly_id!r}")
        return record

    def asset_status(self, asset_id: str) -> str:
        state = self._assets.get(asset_id)
        if state is None:
            raise NotFound(f"unknown asset {asset_id!r}")
        if not state.detection_enabled:
            return "paused"
        open_sev = [
            rec.event.severity
            for rec in self._anomalies.values()
            if rec.event.asset == asset_id and not rec.acknowledged
        ]
        if open_sev:
            return min(open_sev, key=lambda s: s.rank).value
        for chan in state.spec.channels:
            sid = sensor_id(asset_id, chan.channel_id)
            if self._channels[sid].health == Health.FAULTY:
                return "sensor-fault"
        return "nominal"

    def asset_health(self, asset_id: str) -> Dict:
        with self._lock:
            state = self._assets.get(asset_id)
            if state is None:
                raise NotFound(f"unknown asset {asset_id!r}")
            open_anomalies = [
                rec.as_dict()
                for aid in self._anomaly_order
                for rec in (self._anomalies[aid],)
                if rec.event.asset == asset_id and not rec.acknowledged
            ]
            sparkline_ms = hours_to_ms(2 * state.schedule.interval_hours)
            channels = {}
            for chan in sorted(state.spec.channels, key=lambda c: c.channel_id):
                sid = sensor_id(asset_id, chan.channel_id)
                cstate = self._channels[sid]
                cutoff = (
                    max((ts for ts, _ in cstate.window), default=0) - sparkline_ms
                )
                channels[chan.channel_id] = {
                    "sensor": sid,
                    "kind": chan.kind,
                    "health": cstate.health.value,
                    "recent": [
                        [ts, v] for ts, v in cstate.window if ts >= cutoff
                    ],
                }
            return {
                "asset": asset_id,
                "status": self.asset_status(asset_id),
                "detection_enabled": state.detection_enabled,
                "next_inspection_due": state.schedule.next_due,
                "inspection_interval_hours": state.schedule.interval_hours,
                "open_anomalies": open_anomalies,
                "channels": channels,
            }

    def fleet(self) -> List[Dict]:
        with self._lock:
            out = []
            for asset_id in sorted(self._assets):
                state = self._assets[asset_id]
                open_count = sum(
                    1
                    for rec in self._anomalies.values()
                    if rec.event.asset == asset_id and not rec.acknowledged
                )
                out.append(
                    {
                        "asset": asset_id,
                        "status": self.asset_status(asset_id),
                        "open_anomalies": open_count,
                        "next_inspection_due": state.schedule.next_due,
                    }
                )
            return out

    # -- digests and escalation ---------------------------------------------

    def generate_digest(self, period: str, end_ms: int, now_ms: int) -> Dict:
        """Digest derived solely from journal entries (reproducible)."""
        import datetime as dt

        if period == "weekly":
            start_ms = end_ms - 7 * 24 * MS_PER_HOUR
        elif period == "monthly":
            end_dt = dt.datetime.fromtimestamp(end_ms / 1000, tz=dt.timezone.utc)
            month_start = end_dt.replace(
                day=1, hour=0, minute=0, second=0, microsecond=0
            )
            if month_start.month == 12:
                month_end = month_start.replace(year=month_start.year + 1, month=1)
            else:
                month_end = month_start.replace(month=month_start.month + 1)
            start_ms = int(month_start.timestamp() * 1000)
            end_ms = int(month_end.timestamp() * 1000)
        else:
            raise ValidationFailed("period must be 'weekly' or 'monthly'")
        if start_ms < self.origin_ms or end_ms > now_ms:
            raise RangeUnavailable(
                f"journal does not cover [{start_ms}, {end_ms})"
            )

        with self._lock:
            in_range = [e for e in self._events if start_ms <= e["ts"] < end_ms]
            upto = [e for e in self._events if e["ts"] < end_ms]

            counts = {"critical": 0, "warning": 0, "advisory": 0}
            per_asset: Dict[str, Dict] = {
                aid: {
                    "anomalies": {"critical": 0, "warning": 0, "advisory": 0},
                    "sensor_faults": 0,
                    "responses_opened": 0,
                }
                for aid in sorted(self._assets)
            }
            for e in in_range:
                if e["type"] == "anomaly":
                    sev = e["data"]["severity"]
                    counts[sev] += 1
                    bucket = per_asset.setdefault(
                        e["data"]["asset"],
                        {
                            "anomalies": {"critical": 0, "warning": 0, "advisory": 0},
                            "sensor_faults": 0,
                            "responses_opened": 0,
                        },
                    )
                    bucket["anomalies"][sev] += 1
                elif e["type"] == "sensor-fault":
                    per_asset.setdefault(
                        e["data"]["asset"],
                        {
                            "anomalies": {"critical": 0, "warning": 0, "advisory": 0},
                            "sensor_faults": 0,
                            "responses_opened": 0,
                        },
                    )["sensor_faults"] += 1
                elif e["type"] == "response-opened":
                    per_asset.setdefault(
                        e["data"]["asset"],
                        {
                            "anomalies": {"critical": 0, "warning": 0, "advisory": 0},
                            "sensor_faults": 0,
                            "responses_opened": 0,
                        },
                    )["responses_opened"] += 1

            acked = {
                e["data"]["anomaly_id"] for e in upto if e["type"] == "ack"
            }
            open_anomalies = [
                e["data"]["anomaly_id"]
                for e in upto
                if e["type"] == "anomaly" and e["data"]["anomaly_id"] not in acked
            ]
            completed = {
                e["data"]["response_id"]
                for e in upto
                if e["type"] == "response-advanced" and e["data"]["stage"] == "completed"
            }
            open_responses = [
                e["data"]["response_id"]
                for e in upto
                if e["type"] == "response-opened"
                and e["data"]["response_id"] not in completed
            ]
            sensor_faults = [
                e["data"] for e in in_range if e["type"] == "sensor-fault"
            ]
            return {
                "v": 1,
                "period": period,
                "range": {"start": start_ms, "end": end_ms},
                "anomaly_counts": counts,
                "assets": per_asset,
                "open_anomalies": sorted(open_anomalies),
                "open_responses": sorted(open_responses),
                "sensor_faults": sensor_faults,
            }

    def pump_escalations(self, now_ms: int) -> int:
        """Re-notify unacknowledged criticals every 15 minutes."""
        n = 0
        with self._lock:
            for record in self._anomalies.values():
                if record.acknowledged:
                    continue
                if record.event.severity != Severity.CRITICAL:
                    continue
                pipeline = self._responses.get(record.event.anomaly_id)
                if pipeline is not None and pipeline.stage == "completed":
                    continue
                last = record.last_notified_at or record.event.detected_at
                if now_ms - last >= ESCALATION_PERIOD_MS:
                    record.last_notified_at = now_ms
                    self._notify(
                        now_ms,
                        {
                            "kind": "escalation",
                            **anomaly_event_dict(record.event),
                        },
                    )
                    n += 1
        return n

    def config_snapshot(self) -> Dict:
        """Current configuration; journal replay must reproduce this."""
        with self._lock:
            return {
                asset_id: {
                    "limits": [
                        {
                            "channel_kind": r.channel_kind,
                            "lower": r.lower,
                            "upper": r.upper,
                            "severity": r.severity_on_breach.value,
                        }
                        for r in sorted(
                            state.rules.limits, key=lambda r: r.channel_kind
                        )
                    ],
                    "detection_enabled": state.detection_enabled,
                    "fraction": state.schedule.fraction,
                }
                for asset_id, state in sorted(self._assets.items())
            }


# ---------------------------------------------------------------------------
# Rules file (versioned YAML)
# ---------------------------------------------------------------------------


def ruleset_from_dict(asset_id: str, doc: Dict, defaults: Dict) -> RuleSet:
    limits = tuple(
        LimitRule(
            asset=asset_id,
            channel_kind=lr["channel_kind"],
            lower=(None if lr.get("lower") is None else float(lr["lower"])),
            upper=(None if lr.get("upper") is None else float(lr["upper"])),
            severity_on_breach=Severity(lr.get("severity", "warning")),
        )
        for lr in doc.get("limits") or []
    )
    patterns = tuple(
        PatternRule(
            rule_id=pr["rule_id"],
            trigger_sequence=tuple(
                PatternPredicate(
                    channel_kind=step["channel_kind"],
                    comparator=step["comparator"],
                    value=float(step["value"]),
                    max_gap_hours=(
                        None
                        if step.get("max_gap_hours") is None
                        else float(step["max_gap_hours"])
                    ),
                )
                for step in pr["sequence"]
            ),
            conclusion=pr.get("conclusion", ""),
            severity=Severity(pr.get("severity", "warning")),
        )
        for pr in doc.get("patterns") or []
    )
    statistical = None
    if doc.get("statistical"):
        sr = doc["statistical"]
        statistical = StatisticalConfig(
            model=WeibullModel(
                shape_beta=float(sr["shape"]), scale_eta=float(sr["scale"])
            ),
            threshold=float(
                sr.get("threshold", defaults.get("statistical_threshold", 0.10))
            ),
            severity=Severity(sr.get("severity", "warning")),
        )
    return RuleSet(
        limits=limits,
        patterns=patterns,
        statistical=statistical,
        trend_window=int(doc.get("trend_window", defaults.get("trend_window", 12))),
    )


def load_rules(path) -> Dict[str, RuleSet]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if doc.get("version", RULES_SCHEMA_VERSION) != RULES_SCHEMA_VERSION:
        raise ValidationFailed(f"unsupported rules version {doc.get('version')!r}")
    defaults = doc.get("defaults") or {}
    return {
        asset_id: ruleset_from_dict(asset_id, adoc or {}, defaults)
        for asset_id, adoc in (doc.get("assets") or {}).items()
    }


def limits_from_ground_truth(scenario: Scenario) -> Dict[str, RuleSet]:
    """Limit rules placed at each channel's functional-failure level."""
    rules: Dict[str, RuleSet] = {}
    for asset in scenario.assets:
        limits = tuple(
            LimitRule(
                asset=asset.asset_id,
                channel_kind=chan.kind,
                upper=chan.nominal
                + asset.degradation_gain.get(chan.channel_id, 0.0)
                * asset.pf.length ** asset.drift_exponent,
                severity_on_breach=Severity.CRITICAL,
            )
            for chan in sorted(asset.channels, key=lambda c: c.channel_id)
        )
        rules[asset.asset_id] = RuleSet(limits=limits)
    return rules
