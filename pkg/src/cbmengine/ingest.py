"""Telemetry admission, robust outlier screening, and sensor health.

Frames for one sensor must be processed in arrival order by a single worker
(per-sensor serialization); `ChannelState` is confined to that lane. The
detection layer never sees a value that screened as an outlier: it is
substituted with the rolling median, or dropped when there is no history.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Optional, Tuple

from ._kernels import robust_score, window_median
from .units import hours_to_ms
from .wire import TelemetryFrame

WINDOW_SIZE = 32
MIN_HISTORY = 5
OUTLIER_K = 3.5
FAULT_THRESHOLD = 3  # consecutive outliers before a sensor reads faulty
RECOVERY_THRESHOLD = 10  # consecutive normals before a faulty sensor recovers
DEFAULT_STALENESS_HOURS = 24.0


class Health(str, Enum):
    HEALTHY = "healthy"
    SUSPECT = "suspect"
    FAULTY = "faulty"


class NoHistory(Exception):
    """No window history to substitute from; the frame is dropped."""


@dataclass
class ChannelState:
    sensor: str
    window: Deque[Tuple[int, float]] = field(
        default_factory=lambda: deque(maxlen=WINDOW_SIZE)
    )
    last_seq: int = -1
    health: Health = Health.HEALTHY
    consecutive_outliers: int = 0
    consecutive_ok: int = 0

    def values(self):
        return [v for _, v in self.window]


@dataclass(frozen=True)
class Admission:
    accepted: bool
    reason: Optional[str] = None  # "out-of-order" | "stale"


@dataclass(frozen=True)
class ScreenResult:
    outlier: bool
    score: float


@dataclass(frozen=True)
class SubstitutionRecord:
    original: TelemetryFrame
    substituted_value: float
    method: str  # "rolling-median" | "last-good"
    at: int


@dataclass(frozen=True)
class SensorFaultNotice:
    sensor: str
    at: int
    consecutive_outliers: int


def admit(
    frame: TelemetryFrame,
    state: ChannelState,
    now_ms: int,
    staleness_hours: float = DEFAULT_STALENESS_HOURS,
) -> Admission:
    """Order/staleness gate. Quarantine is a return value, not an error."""
    if frame.seq <= state.last_seq:
        return Admission(accepted=False, reason="out-of-order")
    if frame.ts < now_ms - hours_to_ms(staleness_hours):
        return Admission(accepted=False, reason="stale")
    state.last_seq = frame.seq
    return Admission(accepted=True)


def screen_outlier(state: ChannelState, value: float) -> ScreenResult:
    """Score against the rolling window; insufficient history screens ok(0)."""
    if len(state.window) < MIN_HISTORY:
        return ScreenResult(outlier=False, score=0.0)
    score = robust_score(state.values(), value)
    return ScreenResult(outlier=score > OUTLIER_K, score=score)


def substitute(
    state: ChannelState, flagged: TelemetryFrame, now_ms: int
) -> SubstitutionRecord:
    """Replace a flagged value with the rolling median of the window."""
    if not state.window:
        raise NoHistory(f"no history for sensor {state.sensor!r}")
    return SubstitutionRecord(
        original=flagged,
        substituted_value=window_median(state.values()),
        method="rolling-median",
        at=now_ms,
    )


def update_health(
    state: ChannelState, screened: ScreenResult, now_ms: int
) -> Optional[SensorFaultNotice]:
    """Hysteresis: faulty at 3 consecutive outliers, held until 10 normals.

    Returns a notice exactly once, on the transition into faulty.
    """
    if screened.outlier:
        state.consecutive_outliers += 1
        state.consecutive_ok = 0
        if state.health != Health.FAULTY:
            if state.consecutive_outliers >= FAULT_THRESHOLD:
                state.health = Health.FAULTY
                return SensorFaultNotice(
                    sensor=state.sensor,
                    at=now_ms,
                    consecutive_outliers=state.consecutive_outliers,
                )
            state.health = Health.SUSPECT
        return None
    state.consecutive_outliers = 0
    state.consecutive_ok += 1
    if state.health == Health.FAULTY:
        if state.consecutive_ok >= RECOVERY_THRESHOLD:
            state.health = Health.HEALTHY
            state.consecutive_ok = 0
    else:
        state.health = Health.HEALTHY
    return None


@dataclass(frozen=True)
class FrameOutcome:
    frame: TelemetryFrame
    accepted: bool
    quarantine_reason: Optional[str] = None
    dropped: bool = False
    value: Optional[float] = None  # final (possibly substituted) value
    substitution: Optional[SubstitutionRecord] = None
    fault_notice: Optional[SensorFaultNotice] = None
    score: float = 0.0


def process_frame(
    state: ChannelState,
    frame: TelemetryFrame,
    now_ms: int,
    staleness_hours: float = DEFAULT_STALENESS_HOURS,
) -> FrameOutcome:
    """Full per-frame lane: admit, screen, substitute/drop, track health.

    The window is updated only with the screened (post-substitution) value,
    so detection can never observe a flagged reading.
    """
    adm = admit(frame, state, now_ms, staleness_hours)
    if not adm.accepted:
        return FrameOutcome(frame=frame, accepted=False, quarantine_reason=adm.reason)

    screened = screen_outlier(state, frame.value)
    value = frame.value
    substitution = None
    dropped = False
    if screened.outlier:
        try:
            substitution = substitute(state, frame, now_ms)
            value = substitution.substituted_value
        except NoHistory:
            dropped = True
            state.health = Health.SUSPECT

    notice = update_health(state, screened, now_ms)
    if not dropped:
        state.window.append((frame.ts, value))
    return FrameOutcome(
        frame=frame,
        accepted=True,
        dropped=dropped,
        value=None if dropped else value,
        substitution=substitution,
        fault_notice=notice,
        score=screened.score,
    )
