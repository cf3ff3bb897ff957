"""Telemetry wire protocol.

Newline-delimited UTF-8, one frame per line, each line a flat JSON object
with exactly the fields (v, asset, sensor, kind, ts, value, unit, seq) in
that order. `ts` is integer milliseconds since the Unix epoch (UTC); `value`
is a finite decimal literal; lines longer than 4096 bytes are malformed.
See docs/wire.md for the full layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

WIRE_SCHEMA_VERSION = 1
MAX_LINE_BYTES = 4096
FIELDS = ("v", "asset", "sensor", "kind", "ts", "value", "unit", "seq")

CHANNEL_KINDS = (
    "point-temperature",
    "area-pyrometer",
    "temperature-paint",
    "thermography",
    "iso-velocity",
    "spm",
    "acoustic-emission",
    "vibration-meter",
    "current-loop-4-20mA",
    "fluid-viscosity",
    "fluid-contamination",
    "corrosion-rate",
    "electrical-resistance",
    "visual",
)


class MalformedFrame(Exception):
    """The line does not conform to the wire schema."""


@dataclass(frozen=True)
class TelemetryFrame:
    """One timestamped sensor reading."""

    schema_version: int
    asset: str
    sensor: str
    channel_kind: str
    ts: int
    value: float
    unit: str
    seq: int


def encode_frame(frame: TelemetryFrame) -> bytes:
    """Serialize a frame to its canonical wire line (no trailing newline)."""
    if not math.isfinite(frame.value):
        raise ValueError("frame value must be finite")
    obj = {
        "v": frame.schema_version,
        "asset": frame.asset,
        "sensor": frame.sensor,
        "kind": frame.channel_kind,
        "ts": frame.ts,
        "value": frame.value,
        "unit": frame.unit,
        "seq": frame.seq,
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")


def _reject_constant(token: str) -> float:
    raise ValueError(f"non-finite literal {token!r}")


def decode_frame(line: bytes) -> TelemetryFrame:
    """Parse one wire line; raises MalformedFrame on any deviation.

    Decoding is total: hostile input raises MalformedFrame, never anything
    else. Field order is not enforced on input (the encoder fixes it).
    """
    if len(line) > MAX_LINE_BYTES:
        raise MalformedFrame(f"line exceeds {MAX_LINE_BYTES} bytes")
    try:
        text = line.decode("utf-8").strip()
        obj = json.loads(text, parse_constant=_reject_constant)
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedFrame(f"undecodable line: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrame("frame must be a flat object")
    if set(obj) != set(FIELDS):
        missing = set(FIELDS) - set(obj)
        extra = set(obj) - set(FIELDS)
        raise MalformedFrame(f"field mismatch (missing={sorted(missing)}, extra={sorted(extra)})")

    v = obj["v"]
    if not isinstance(v, int) or isinstance(v, bool) or v != WIRE_SCHEMA_VERSION:
        raise MalformedFrame(f"unknown schema version {v!r}")
    for key in ("asset", "sensor", "kind", "unit"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise MalformedFrame(f"{key} must be a non-empty string")
    if obj["kind"] not in CHANNEL_KINDS:
        raise MalformedFrame(f"unknown channel kind {obj['kind']!r}")
    ts = obj["ts"]
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise MalformedFrame("ts must be integer milliseconds")
    seq = obj["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise MalformedFrame("seq must be a non-negative integer")
    value = obj["value"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedFrame("value must be a decimal literal")
    value = float(value)
    if not math.isfinite(value):
        raise MalformedFrame("value must be finite")

    return TelemetryFrame(
        schema_version=v,
        asset=obj["asset"],
        sensor=obj["sensor"],
        channel_kind=obj["kind"],
        ts=ts,
        value=value,
        unit=obj["unit"],
        seq=seq,
    )
