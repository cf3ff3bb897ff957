"""Wire codec: canonical encoding, total decoding, hostile input."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbmengine.wire import (
    CHANNEL_KINDS,
    MAX_LINE_BYTES,
    MalformedFrame,
    TelemetryFrame,
    decode_frame,
    encode_frame,
)


def frame(**overrides):
    base = dict(
        schema_version=1,
        asset="A1",
        sensor="A1.temp",
        channel_kind="point-temperature",
        ts=1_700_000_000_000,
        value=70.25,
        unit="degC",
        seq=17,
    )
    base.update(overrides)
    return TelemetryFrame(**base)


def test_encode_field_order_is_canonical():
    line = encode_frame(frame())
    assert line == (
        b'{"v":1,"asset":"A1","sensor":"A1.temp","kind":"point-temperature",'
        b'"ts":1700000000000,"value":70.25,"unit":"degC","seq":17}'
    )


def test_round_trip():
    f = frame()
    assert decode_frame(encode_frame(f)) == f


@given(
    st.sampled_from(CHANNEL_KINDS),
    st.integers(0, 2**50),
    st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False),
    st.integers(0, 2**40),
)
@settings(max_examples=200)
def test_round_trip_property(kind, ts, value, seq):
    f = frame(channel_kind=kind, ts=ts, value=value, seq=seq)
    assert decode_frame(encode_frame(f)) == f


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("seq"),
        lambda d: d.pop("ts"),
        lambda d: d.update(v=2),
        lambda d: d.update(extra=1),
        lambda d: d.update(value="NaN"),
        lambda d: d.update(value=True),
        lambda d: d.update(ts=1.5),
        lambda d: d.update(seq=-1),
        lambda d: d.update(kind="warp-core"),
        lambda d: d.update(asset=""),
    ],
)
def test_malformed_variants(mutate):
    doc = json.loads(encode_frame(frame()).decode())
    mutate(doc)
    with pytest.raises(MalformedFrame):
        decode_frame(json.dumps(doc).encode())


def test_nan_literal_rejected():
    line = encode_frame(frame()).replace(b"70.25", b"NaN")
    with pytest.raises(MalformedFrame):
        decode_frame(line)


def test_oversized_line_rejected():
    line = encode_frame(frame(asset="A" * MAX_LINE_BYTES))
    with pytest.raises(MalformedFrame, match="exceeds"):
        decode_frame(line)


@given(st.binary(max_size=256))
@settings(max_examples=300)
def test_decode_is_total_on_hostile_input(blob):
    try:
        decode_frame(blob)
    except MalformedFrame:
        pass  # the only acceptable failure mode


def test_non_finite_encode_rejected():
    with pytest.raises(ValueError):
        encode_frame(frame(value=float("inf")))
