"""Inspection cadence, the response pipeline, and policy simulation.

The inspection interval is a fraction of the P-F window (half by default;
smaller fractions detect earlier at higher monitoring cost). The response
pipeline walks the four corrective-action stages. `simulate_policy` runs a
deterministic discrete-event comparison of corrective, preventive, and
predictive maintenance over a scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .detection import (
    AnomalyEvent,
    LimitRule,
    Severity,
    trend_analysis,
)
from .reliability import PFInterval
from .simulator import Scenario, gaussian_draw, policy_rng
from .units import hours_to_ms

STAGES = (
    "analyse-root-cause",
    "plan-corrective-action",
    "organize-resources",
    "implement",
    "completed",
)

DEFAULT_FRACTION = 0.5


class InvalidFraction(Exception):
    """Inspection fraction must lie in (0, 1]."""


class ClockRegression(Exception):
    """Inspection completion reported before it was due."""


class DuplicateResponse(Exception):
    """The anomaly already owns an open response pipeline."""


class AlreadyCompleted(Exception):
    """The pipeline is terminal."""


class InvalidCostTable(Exception):
    """Cost table missing required entries or carrying negative values."""


def inspection_interval(pf: PFInterval, fraction: float = DEFAULT_FRACTION) -> float:
    """Inspection cadence as an exact fraction of the P-F window."""
    if not (0 < fraction <= 1):
        raise InvalidFraction(f"fraction must lie in (0, 1], got {fraction}")
    return pf.length * fraction


@dataclass(frozen=True)
class InspectionSchedule:
    asset: str
    pf: PFInterval
    fraction: float
    interval_hours: float
    next_due: int  # epoch ms

    @classmethod
    def create(
        cls, asset: str, pf: PFInterval, now_ms: int, fraction: float = DEFAULT_FRACTION
    ) -> "InspectionSchedule":
        interval = inspection_interval(pf, fraction)
        return cls(
            asset=asset,
            pf=pf,
            fraction=fraction,
            interval_hours=interval,
            next_due=now_ms + hours_to_ms(interval),
        )


def next_inspection(schedule: InspectionSchedule, completed_at: int) -> InspectionSchedule:
    """Re-anchor the cadence to the completion instant (no drift pile-up)."""
    if completed_at < schedule.next_due:
        raise ClockRegression(
            f"completed_at {completed_at} precedes due time {schedule.next_due}"
        )
    return replace(schedule, next_due=completed_at + hours_to_ms(schedule.interval_hours))


@dataclass
class ResponsePipeline:
    response_id: str
    anomaly: AnomalyEvent
    stage: str
    stage_entered_at: Dict[str, int]
    deadline: int
    overdue: bool = False


def open_response(
    anomaly: AnomalyEvent,
    now_ms: int,
    *,
    pf: Optional[PFInterval] = None,
    registry: Optional[Dict[str, ResponsePipeline]] = None,
) -> ResponsePipeline:
    """Open the four-stage response for an anomaly.

    The deadline is the predicted functional-failure time when known, else
    one P-F interval from now (pf required in that case). A registry, when
    provided, enforces one open pipeline per anomaly.
    """
    if registry is not None:
        existing = registry.get(anomaly.anomaly_id)
        if existing is not None and existing.stage != "completed":
            raise DuplicateResponse(anomaly.anomaly_id)
    if anomaly.predicted_failure_at is not None:
        deadline = anomaly.predicted_failure_at
    elif pf is not None:
        deadline = now_ms + hours_to_ms(pf.length)
    else:
        raise ValueError("no predicted failure time and no P-F interval fallback")
    pipeline = ResponsePipeline(
        response_id=f"resp:{anomaly.anomaly_id}",
        anomaly=anomaly,
        stage=STAGES[0],
        stage_entered_at={STAGES[0]: now_ms},
        deadline=deadline,
    )
    if registry is not None:
        registry[anomaly.anomaly_id] = pipeline
    return pipeline


def advance_response(pipeline: ResponsePipeline, now_ms: int) -> ResponsePipeline:
    """Move to the next stage in order; past-deadline advances flag overdue."""
    if pipeline.stage == "completed":
        raise AlreadyCompleted(pipeline.response_id)
    nxt = STAGES[STAGES.index(pipeline.stage) + 1]
    pipeline.stage = nxt
    pipeline.stage_entered_at[nxt] = now_ms
    if now_ms > pipeline.deadline:
        pipeline.overdue = True
    return pipeline


@dataclass(frozen=True)
class PredictiveConfig:
    fraction: float = DEFAULT_FRACTION
    trend_window: int = 12
    # Limit level as a fraction of the P-to-F drift: 1.0 puts the limit at
    # the functional-failure level; smaller values alarm earlier.
    limit_margin: float = 1.0

    def __post_init__(self) -> None:
        if not (0 < self.fraction <= 1):
            raise InvalidFraction(f"fraction must lie in (0, 1], got {self.fraction}")
        if not (0 < self.limit_margin <= 1):
            raise ValueError(f"limit_margin must lie in (0, 1], got {self.limit_margin}")


@dataclass(frozen=True)
class MaintenancePolicy:
    kind: str  # corrective | preventive | predictive
    preventive_period_hours: Optional[float] = None
    detection: Optional[PredictiveConfig] = None

    def __post_init__(self) -> None:
        if self.kind not in ("corrective", "preventive", "predictive"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "preventive" and not (
            self.preventive_period_hours and self.preventive_period_hours > 0
        ):
            raise ValueError("preventive policy requires a positive preventive_period_hours")
        if self.kind != "preventive" and self.preventive_period_hours is not None:
            raise ValueError("preventive_period_hours only applies to preventive policies")
        if self.kind == "predictive" and self.detection is None:
            raise ValueError("predictive policy requires a detection config")
        if self.kind != "predictive" and self.detection is not None:
            raise ValueError("detection config only applies to predictive policies")


@dataclass(frozen=True)
class CostTable:
    breakdown_cost: float
    planned_intervention_cost: float
    downtime_cost_per_hour: float
    breakdown_downtime_hours: float = 24.0
    planned_downtime_hours: float = 4.0
    production_units_per_hour: float = 0.0
    response_hours: float = 0.0

    def __post_init__(self) -> None:
        for name in (
            "breakdown_cost",
            "planned_intervention_cost",
            "downtime_cost_per_hour",
            "breakdown_downtime_hours",
            "planned_downtime_hours",
            "production_units_per_hour",
            "response_hours",
        ):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or not math.isfinite(val) or val < 0:
                raise InvalidCostTable(f"{name} must be a non-negative finite number")


def cost_table_from_dict(doc: Dict) -> CostTable:
    if not isinstance(doc, dict):
        raise InvalidCostTable("cost table document must be a mapping")
    if doc.get("version", 1) != 1:
        raise InvalidCostTable(f"unsupported cost table version {doc.get('version')!r}")
    required = ("breakdown_cost", "planned_intervention_cost", "downtime_cost_per_hour")
    missing = [k for k in required if k not in doc]
    if missing:
        raise InvalidCostTable(f"cost table missing required keys: {missing}")
    kwargs = {k: float(doc[k]) for k in required}
    for opt in (
        "breakdown_downtime_hours",
        "planned_downtime_hours",
        "production_units_per_hour",
        "response_hours",
    ):
        if opt in doc:
            kwargs[opt] = float(doc[opt])
    return CostTable(**kwargs)


@dataclass
class PolicyOutcome:
    unplanned_breakdowns: int = 0
    planned_interventions: int = 0
    downtime_hours: float = 0.0
    maintenance_cost: float = 0.0
    production_lost: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return {
            "unplanned_breakdowns": self.unplanned_breakdowns,
            "planned_interventions": self.planned_interventions,
            "downtime_hours": self.downtime_hours,
            "maintenance_cost": self.maintenance_cost,
            "production_lost": self.production_lost,
        }


class _Tally:
    def __init__(self, costs: CostTable, horizon: float):
        self.costs = costs
        self.horizon = horizon
        self.out = PolicyOutcome()

    def breakdown(self, at: float) -> float:
        """Returns the repair-completion time."""
        dt = min(self.costs.breakdown_downtime_hours, self.horizon - at)
        self.out.unplanned_breakdowns += 1
        self.out.downtime_hours += dt
        self.out.maintenance_cost += (
            self.costs.breakdown_cost + dt * self.costs.downtime_cost_per_hour
        )
        self.out.production_lost += dt * self.costs.production_units_per_hour
        return at + self.costs.breakdown_downtime_hours

    def planned(self, at: float) -> float:
        dt = min(self.costs.planned_downtime_hours, self.horizon - at)
        self.out.planned_interventions += 1
        self.out.downtime_hours += dt
        self.out.maintenance_cost += (
            self.costs.planned_intervention_cost + dt * self.costs.downtime_cost_per_hour
        )
        self.out.production_lost += dt * self.costs.production_units_per_hour
        return at + self.costs.planned_downtime_hours


def _simulate_corrective(scenario: Scenario, costs: CostTable) -> PolicyOutcome:
    horizon = scenario.horizon_hours
    tally = _Tally(costs, horizon)
    for asset in scenario.assets:
        good_at = 0.0
        while True:
            failure = good_at + asset.degradation_onset_hours + asset.pf.length
            if failure >= horizon:
                break
            good_at = tally.breakdown(failure)
            if good_at >= horizon:
                break
    return tally.out


def _simulate_preventive(
    scenario: Scenario, period: float, costs: CostTable
) -> PolicyOutcome:
    horizon = scenario.horizon_hours
    tally = _Tally(costs, horizon)
    for asset in scenario.assets:
        good_at = 0.0
        k = 1  # services on the global k*period grid; skipped while down
        while True:
            failure = good_at + asset.degradation_onset_hours + asset.pf.length
            while k * period <= good_at:
                k += 1
            service = k * period
            if service < failure and service < horizon:
                good_at = tally.planned(service)
                k += 1
                if good_at >= horizon:
                    break
                continue
            if failure < horizon:
                good_at = tally.breakdown(failure)
                if good_at >= horizon:
                    break
                continue
            break
    return tally.out


def _simulate_predictive(
    scenario: Scenario, config: PredictiveConfig, costs: CostTable
) -> PolicyOutcome:
    """Sensors stream on their own cadence; inspections review the window.

    At each inspection the channel windows (latest `trend_window` samples on
    the channel's absolute sample grid) run through limit and trend checks;
    a >= warning verdict schedules a repair completing after the response
    time. A repair overtaken by F counts as an unplanned breakdown.
    """
    horizon = scenario.horizon_hours
    tally = _Tally(costs, horizon)
    assets = sorted(scenario.assets, key=lambda a: a.asset_id)
    for asset_idx, asset in enumerate(assets):
        interval = inspection_interval(asset.pf, config.fraction)
        channels = sorted(asset.channels, key=lambda c: c.channel_id)
        rngs = [policy_rng(scenario.seed, asset_idx, ci) for ci in range(len(channels))]
        # Limit at (or, with margin < 1, before) the functional-failure level.
        rules = [
            LimitRule(
                asset=asset.asset_id,
                channel_kind=chan.kind,
                upper=chan.nominal
                + asset.degradation_gain.get(chan.channel_id, 0.0)
                * (config.limit_margin * asset.pf.length) ** asset.drift_exponent,
                severity_on_breach=Severity.CRITICAL,
            )
            for chan in channels
        ]
        windows: List[List[Tuple[float, float]]] = [[] for _ in channels]
        last_sampled = [0.0 for _ in channels]

        def sample_through(t: float, onset: float) -> None:
            for ci, chan in enumerate(channels):
                period = chan.sample_period_hours
                gain = asset.degradation_gain.get(chan.channel_id, 0.0)
                k = math.floor(last_sampled[ci] / period) + 1
                while k * period <= t:
                    ts = k * period
                    mean = chan.nominal
                    if ts >= onset:
                        mean += gain * (ts - onset) ** asset.drift_exponent
                    value = mean
                    if chan.noise_sigma > 0:
                        value += chan.noise_sigma * gaussian_draw(rngs[ci])
                    windows[ci].append((ts, value))
                    if len(windows[ci]) > config.trend_window:
                        del windows[ci][0]
                    k += 1
                last_sampled[ci] = t

        good_at = 0.0
        next_insp = interval
        repair_due: Optional[float] = None
        while True:
            onset = good_at + asset.degradation_onset_hours
            failure = onset + asset.pf.length
            candidates: List[Tuple[float, int, str]] = []
            if repair_due is not None and repair_due < horizon:
                candidates.append((repair_due, 0, "repair"))
            if failure < horizon:
                candidates.append((failure, 1, "fail"))
            if next_insp < horizon:
                candidates.append((next_insp, 2, "inspect"))
            if not candidates:
                break
            t, _, what = min(candidates)

            if what == "repair":
                good_at = tally.planned(t)
                repair_due = None
                windows = [[] for _ in channels]
                last_sampled = [good_at for _ in channels]  # sensors idle in downtime
                next_insp = good_at + interval
                if good_at >= horizon:
                    break
            elif what == "fail":
                # F arrived before a repair completed (or before detection):
                # an unplanned breakdown either way.
                good_at = tally.breakdown(t)
                repair_due = None
                windows = [[] for _ in channels]
                last_sampled = [good_at for _ in channels]
                next_insp = good_at + interval
                if good_at >= horizon:
                    break
            else:  # inspect
                sample_through(t, onset)
                detected = False
                for ci, window in enumerate(windows):
                    rule = rules[ci]
                    if window and window[-1][1] > rule.upper:
                        detected = True
                    elif len(window) >= 3:
                        model = trend_analysis(window, rule)
                        if model.predicted_crossing is not None:
                            sev = _policy_trend_severity(
                                model.predicted_crossing, t, interval, asset.pf.length
                            )
                            if sev in (Severity.WARNING, Severity.CRITICAL):
                                detected = True
                if detected and repair_due is None:
                    repair_due = t + costs.response_hours
                next_insp = t + interval
    return tally.out


def _policy_trend_severity(
    crossing: float, now: float, interval: float, pf_length: float
) -> Severity:
    remaining = crossing - now
    if remaining < 0.5 * interval:
        return Severity.CRITICAL
    if remaining < pf_length:
        return Severity.WARNING
    return Severity.ADVISORY


def simulate_policy(
    scenario: Scenario, policy: MaintenancePolicy, costs: CostTable
) -> PolicyOutcome:
    """Discrete-event outcome of one maintenance policy over a scenario.

    Repairs restore assets to good-as-new with the next degradation onset
    after the scenario's original onset delay; results are deterministic
    for a given scenario seed.
    """
    if policy.kind == "corrective":
        return _simulate_corrective(scenario, costs)
    if policy.kind == "preventive":
        assert policy.preventive_period_hours is not None
        return _simulate_preventive(scenario, policy.preventive_period_hours, costs)
    assert policy.detection is not None
    return _simulate_predictive(scenario, policy.detection, costs)


# Published industry estimates quoted for context in comparison reports.
# They come from unpublished studies and are not reproduced by this
# simulation; reports label them accordingly.
CLAIMED_INDUSTRY_RANGES = (
    ("overall savings over traditional maintenance schemes", "8% to 12%"),
    ("reduction in maintenance costs", "25% to 30%"),
    ("elimination of breakdowns", "70% to 75%"),
    ("reduction in equipment or process downtime", "35% to 45%"),
    ("increase in production", "20% to 25%"),
)

CONTEXT_LABEL = "published industry estimates (context only, not reproduced by this simulation)"


@dataclass(frozen=True)
class PolicyComparison:
    labels: Tuple[str, ...]
    outcomes: Dict[str, PolicyOutcome]
    baseline: str
    deltas_vs_baseline: Dict[str, Dict[str, Optional[float]]]

    def as_dict(self) -> Dict:
        return {
            "version": 1,
            "baseline": self.baseline,
            "outcomes": {k: v.as_dict() for k, v in self.outcomes.items()},
            "deltas_vs_baseline_pct": self.deltas_vs_baseline,
            "context": {
                "label": CONTEXT_LABEL,
                "ranges": [{"metric": m, "claimed": r} for m, r in CLAIMED_INDUSTRY_RANGES],
            },
        }


def compare_policies(
    scenario: Scenario, policies: Sequence[MaintenancePolicy], costs: CostTable
) -> PolicyComparison:
    """Run every policy and report reduction percentages vs the baseline.

    The baseline is the corrective policy when present, else the first
    listed. Claimed industry ranges ride along as labeled context; they are
    never asserted against.
    """
    if len(policies) < 2:
        raise ValueError("need at least 2 policies to compare")
    labels: List[str] = []
    outcomes: Dict[str, PolicyOutcome] = {}
    for policy in policies:
        label = policy.kind
        n = 2
        while label in outcomes:
            label = f"{policy.kind}-{n}"
            n += 1
        labels.append(label)
        outcomes[label] = simulate_policy(scenario, policy, costs)

    baseline = next(
        (lbl for lbl, pol in zip(labels, policies) if pol.kind == "corrective"), labels[0]
    )
    base = outcomes[baseline]

    def reduction(base_v: float, v: float) -> Optional[float]:
        if base_v == 0:
            return None
        return 100.0 * (base_v - v) / base_v

    deltas = {
        label: {
            "unplanned_breakdowns": reduction(
                base.unplanned_breakdowns, out.unplanned_breakdowns
            ),
            "downtime_hours": reduction(base.downtime_hours, out.downtime_hours),
            "maintenance_cost": reduction(base.maintenance_cost, out.maintenance_cost),
            "production_lost": reduction(base.production_lost, out.production_lost),
        }
        for label, out in outcomes.items()
    }
    return PolicyComparison(
        labels=tuple(labels),
        outcomes=outcomes,
        baseline=baseline,
        deltas_vs_baseline=deltas,
    )


def policies_from_dict(doc: Dict) -> List[MaintenancePolicy]:
    if not isinstance(doc, dict):
        raise ValueError("policies document must be a mapping")
    if doc.get("version", 1) != 1:
        raise ValueError(f"unsupported policies version {doc.get('version')!r}")
    policies = []
    for praw in doc.get("policies") or []:
        kind = praw["kind"]
        detection = None
        if kind == "predictive":
            draw = praw.get("detection") or {}
            detection = PredictiveConfig(
                fraction=float(draw.get("fraction", DEFAULT_FRACTION)),
                trend_window=int(draw.get("trend_window", 12)),
                limit_margin=float(draw.get("limit_margin", 1.0)),
            )
        policies.append(
            MaintenancePolicy(
                kind=kind,
                preventive_period_hours=(
                    float(praw["preventive_period_hours"])
                    if praw.get("preventive_period_hours") is not None
                    else None
                ),
                detection=detection,
            )
        )
    return policies
