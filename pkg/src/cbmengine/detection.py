"""The four condition-assessment methods and anomaly arbitration.

Trend analysis (least-squares over recent points, crossing prediction),
critical-range limits, causal pattern rules, and the statistical check
against a fitted lifetime model. `evaluate` runs all four over an immutable
asset snapshot and produces a deterministically ordered anomaly list.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from ._kernels import linear_fit
from .ingest import Health
from .reliability import PFInterval, WeibullModel, conditional_failure_probability
from .units import MS_PER_HOUR

DEFAULT_TREND_WINDOW = 12
DEFAULT_STATISTICAL_THRESHOLD = 0.10
# Projected limit crossings farther out than this many P-F intervals are
# noise, not deterioration; raising them would storm the anomaly queue.
TREND_HORIZON_PF = 2.0


class Severity(str, Enum):
    ADVISORY = "advisory"
    WARNING = "warning"
    CRITICAL = "critical"

    @property
    def rank(self) -> int:
        return {"critical": 0, "warning": 1, "advisory": 2}[self.value]


_METHOD_PRIORITY = {"limit": 0, "trend": 1, "statistical": 2, "pattern": 3}


class InsufficientPoints(Exception):
    """Trend analysis needs at least three monitoring points."""


@dataclass(frozen=True)
class LimitRule:
    asset: str
    channel_kind: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    severity_on_breach: Severity = Severity.WARNING

    def __post_init__(self) -> None:
        if self.lower is None and self.upper is None:
            raise ValueError("limit rule needs at least one bound")
        if self.lower is not None and self.upper is not None and not (self.lower < self.upper):
            raise ValueError("lower bound must be strictly below upper bound")


@dataclass(frozen=True)
class TrendModel:
    slope: float
    intercept: float
    n_points: int
    residual_rms: float
    predicted_crossing: Optional[float] = None


@dataclass(frozen=True)
class PatternPredicate:
    channel_kind: str
    comparator: str  # one of > < >= <= ==
    value: float
    max_gap_hours: Optional[float] = None  # gap from the previous matched event


@dataclass(frozen=True)
class PatternRule:
    rule_id: str
    trigger_sequence: Tuple[PatternPredicate, ...]
    conclusion: str
    severity: Severity = Severity.WARNING

    def __post_init__(self) -> None:
        if not self.trigger_sequence:
            raise ValueError("trigger_sequence must be non-empty")


@dataclass(frozen=True)
class StatisticalConfig:
    model: WeibullModel
    threshold: float = DEFAULT_STATISTICAL_THRESHOLD
    severity: Severity = Severity.WARNING

    def __post_init__(self) -> None:
        if not (0 < self.threshold < 1):
            raise ValueError("threshold must lie in (0, 1)")


@dataclass(frozen=True)
class AnomalyEvent:
    anomaly_id: str
    asset: str
    method: str  # trend | limit | pattern | statistical
    severity: Severity
    detected_at: int
    predicted_failure_at: Optional[int] = None
    evidence: str = ""

    def __post_init__(self) -> None:
        if (
            self.predicted_failure_at is not None
            and self.predicted_failure_at < self.detected_at
        ):
            raise ValueError("predicted_failure_at must not precede detected_at")


@dataclass(frozen=True)
class RuleSet:
    limits: Tuple[LimitRule, ...] = ()
    patterns: Tuple[PatternRule, ...] = ()
    statistical: Optional[StatisticalConfig] = None
    trend_window: int = DEFAULT_TREND_WINDOW


@dataclass(frozen=True)
class ChannelSnapshot:
    channel_id: str
    sensor: str
    kind: str
    health: Health
    points: Tuple[Tuple[int, float], ...]  # accepted/substituted readings only


@dataclass(frozen=True)
class AssetSnapshot:
    """Everything one inspection instant needs; immutable and replayable."""

    asset: str
    now: int
    channels: Tuple[ChannelSnapshot, ...]
    events: Tuple[Tuple[int, str, float], ...] = ()  # (ts, kind, value) log
    age_hours: Optional[float] = None
    pf: Optional[PFInterval] = None
    inspection_interval_hours: Optional[float] = None


def trend_analysis(
    points: Sequence[Tuple[float, float]], rule: LimitRule
) -> TrendModel:
    """Least-squares line over time-ordered points, plus limit crossing.

    The crossing is the time where the fitted line meets the bound it is
    moving toward (upper for positive slope, lower for negative); absent
    when the slope is flat or moves away from every bound.
    """
    if len(points) < 3:
        raise InsufficientPoints(f"need at least 3 points, got {len(points)}")
    xs = [float(t) for t, _ in points]
    vs = [float(v) for _, v in points]
    slope, intercept, rms = linear_fit(xs, vs)

    crossing: Optional[float] = None
    if slope > 0 and rule.upper is not None:
        crossing = (rule.upper - intercept) / slope
    elif slope < 0 and rule.lower is not None:
        crossing = (rule.lower - intercept) / slope
    return TrendModel(
        slope=slope,
        intercept=intercept,
        n_points=len(points),
        residual_rms=rms,
        predicted_crossing=crossing,
    )


def check_limits(
    value: float, rule: LimitRule, now: int, *, asset: str = "", channel: str = ""
) -> Optional[AnomalyEvent]:
    """Critical-range check; bounds are inclusive-pass (breach is strict)."""
    breached = None
    if rule.lower is not None and value < rule.lower:
        breached = ("below", rule.lower)
    elif rule.upper is not None and value > rule.upper:
        breached = ("above", rule.upper)
    if breached is None:
        return None
    side, bound = breached
    return AnomalyEvent(
        anomaly_id=f"{asset or rule.asset}:{now}:limit:{channel}",
        asset=asset or rule.asset,
        method="limit",
        severity=rule.severity_on_breach,
        detected_at=now,
        evidence=f"value {value!r} {side} bound {bound!r}",
    )


_COMPARATORS = {
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    "==": lambda a, b: a == b,
}


def _match_from(
    history: Sequence[Tuple[int, str, float]],
    predicates: Sequence[PatternPredicate],
    start: int,
    prev_ts: Optional[int],
) -> Optional[List[int]]:
    if not predicates:
        return []
    pred = predicates[0]
    cmp = _COMPARATORS[pred.comparator]
    max_gap_ms = (
        None if pred.max_gap_hours is None else int(pred.max_gap_hours * MS_PER_HOUR)
    )
    for i in range(start, len(history)):
        ts, kind, value = history[i]
        if prev_ts is not None and max_gap_ms is not None and ts - prev_ts > max_gap_ms:
            break  # history is time-ordered; later events only widen the gap
        if kind != pred.channel_kind or not cmp(value, pred.value):
            continue
        rest = _match_from(history, predicates[1:], i + 1, ts)
        if rest is not None:
            return [i] + rest
    return None


def match_pattern(
    history: Sequence[Tuple[int, str, float]],
    rule: PatternRule,
    now: int,
    *,
    asset: str = "",
) -> Optional[AnomalyEvent]:
    """Match the trigger sequence as a gap-bounded subsequence of history."""
    indices = _match_from(history, rule.trigger_sequence, 0, None)
    if indices is None:
        return None
    matched_ts = [history[i][0] for i in indices]
    return AnomalyEvent(
        anomaly_id=f"{asset}:{now}:pattern:{rule.rule_id}",
        asset=asset,
        method="pattern",
        severity=rule.severity,
        detected_at=now,
        evidence=f"{rule.conclusion} (matched at {matched_ts})",
    )


def statistical_check(
    age_hours: float,
    model: WeibullModel,
    inspection_interval_hours: float,
    threshold: float,
    *,
    now: int = 0,
    asset: str = "",
    severity: Severity = Severity.WARNING,
) -> Optional[AnomalyEvent]:
    """Flag when the conditional failure probability over the next
    inspection interval exceeds the configured threshold."""
    prob = conditional_failure_probability(model, age_hours, inspection_interval_hours)
    if prob <= threshold:
        return None
    return AnomalyEvent(
        anomaly_id=f"{asset}:{now}:statistical",
        asset=asset,
        method="statistical",
        severity=severity,
        detected_at=now,
        evidence=(
            f"conditional failure probability {prob:.6f} over next "
            f"{inspection_interval_hours}h exceeds threshold {threshold}"
        ),
    )


def _trend_severity(
    crossing_ms: float, now: int, pf: Optional[PFInterval], interval_hours: Optional[float]
) -> Severity:
    remaining_ms = crossing_ms - now
    if interval_hours is not None and remaining_ms < 0.5 * interval_hours * MS_PER_HOUR:
        return Severity.CRITICAL
    if pf is not None and remaining_ms < pf.length * MS_PER_HOUR:
        return Severity.WARNING
    return Severity.ADVISORY


def anomaly_sort_key(event: AnomalyEvent):
    """Total order: severity desc, predicted failure asc (absent last),
    method priority, anomaly_id."""
    return (
        event.severity.rank,
        (0, event.predicted_failure_at) if event.predicted_failure_at is not None else (1, 0),
        _METHOD_PRIORITY[event.method],
        event.anomaly_id,
    )


def evaluate(snapshot: AssetSnapshot, rules: RuleSet) -> Tuple[AnomalyEvent, ...]:
    """Run all four methods over one snapshot; pure and deterministic.

    Faulty channels are excluded. Duplicate anomalies for the same
    (method, channel, rule) key within the inspection are merged.
    """
    merged: Dict[Tuple[str, str, str], AnomalyEvent] = {}

    def add(key: Tuple[str, str, str], event: Optional[AnomalyEvent]) -> None:
        if event is not None and key not in merged:
            merged[key] = event

    active = [c for c in snapshot.channels if c.health != Health.FAULTY]

    for rule_idx, rule in enumerate(rules.limits):
        for chan in active:
            if chan.kind != rule.channel_kind or not chan.points:
                continue
            latest = chan.points[-1][1]
            event = check_limits(
                latest, rule, snapshot.now, asset=snapshot.asset, channel=chan.channel_id
            )
            if event is not None:
                event = replace(
                    event,
                    anomaly_id=f"{snapshot.asset}:{snapshot.now}:limit:{chan.channel_id}:{rule_idx}",
                )
            add(("limit", chan.channel_id, str(rule_idx)), event)

            # Trend runs against the same bound definition.
            horizon_ms = (
                int(snapshot.pf.length * MS_PER_HOUR) if snapshot.pf is not None else None
            )
            pts = [
                (ts / MS_PER_HOUR, v)
                for ts, v in chan.points
                if horizon_ms is None or ts >= snapshot.now - horizon_ms
            ][-rules.trend_window :]
            if len(pts) < 3:
                continue
            model = trend_analysis(pts, rule)
            if model.predicted_crossing is None:
                continue
            crossing_ms = model.predicted_crossing * MS_PER_HOUR
            if (
                snapshot.pf is not None
                and crossing_ms - snapshot.now
                > TREND_HORIZON_PF * snapshot.pf.length * MS_PER_HOUR
            ):
                continue
            severity = _trend_severity(
                crossing_ms, snapshot.now, snapshot.pf, snapshot.inspection_interval_hours
            )
            predicted = max(int(round(crossing_ms)), snapshot.now)
            add(
                ("trend", chan.channel_id, str(rule_idx)),
                AnomalyEvent(
                    anomaly_id=f"{snapshot.asset}:{snapshot.now}:trend:{chan.channel_id}:{rule_idx}",
                    asset=snapshot.asset,
                    method="trend",
                    severity=severity,
                    detected_at=snapshot.now,
                    predicted_failure_at=predicted,
                    evidence=(
                        f"slope {model.slope:.6g}/h over {model.n_points} points; "
                        f"projected limit crossing at t={predicted}"
                    ),
                ),
            )

    if rules.statistical is not None and snapshot.age_hours is not None:
        interval = snapshot.inspection_interval_hours
        if interval is not None:
            add(
                ("statistical", "", ""),
                statistical_check(
                    snapshot.age_hours,
                    rules.statistical.model,
                    interval,
                    rules.statistical.threshold,
                    now=snapshot.now,
                    asset=snapshot.asset,
                    severity=rules.statistical.severity,
                ),
            )

    for rule in rules.patterns:
        add(
            ("pattern", "", rule.rule_id),
            match_pattern(snapshot.events, rule, snapshot.now, asset=snapshot.asset),
        )

    return tuple(sorted(merged.values(), key=anomaly_sort_key))
