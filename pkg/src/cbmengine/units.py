"""Time unit conventions shared across the engine.

Timestamps are integer milliseconds since the Unix epoch (UTC); durations in
configuration and domain math are float hours.
"""

MS_PER_HOUR = 3_600_000


def hours_to_ms(hours: float) -> int:
    return int(round(hours * MS_PER_HOUR))


def ms_to_hours(ms: int) -> float:
    return ms / MS_PER_HOUR
