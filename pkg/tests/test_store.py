"""Append-only store: idempotence, retention, checksums, replay."""

import pytest

from cbmengine.ingest import SubstitutionRecord
from cbmengine.store import (
    FrameStore,
    InvalidRange,
    RangeUnavailable,
    RetentionPolicy,
    StorageFull,
    load_frames,
)
from cbmengine.units import hours_to_ms
from cbmengine.wire import TelemetryFrame, encode_frame


def frame(seq=0, ts=0, value=5.0, sensor="A1.temp", asset="A1"):
    return TelemetryFrame(
        schema_version=1,
        asset=asset,
        sensor=sensor,
        channel_kind="point-temperature",
        ts=ts,
        value=value,
        unit="degC",
        seq=seq,
    )


@pytest.fixture
def store(tmp_path):
    s = FrameStore(tmp_path / "data")
    yield s
    s.close()


class TestAppendQuery:
    def test_read_your_write(self, store):
        f = frame(ts=1000)
        store.append(f)
        assert store.query("A1", None, (0, 2000)) == [f]

    def test_idempotent_on_duplicate_key(self, store):
        store.append(frame(seq=1, ts=1000))
        store.append(frame(seq=1, ts=1000))
        assert store.frame_count() == 1

    def test_quota(self, tmp_path):
        with FrameStore(tmp_path / "data", max_frames=2) as s:
            s.append(frame(seq=0))
            s.append(frame(seq=1, ts=1))
            with pytest.raises(StorageFull):
                s.append(frame(seq=2, ts=2))

    def test_query_ordering_and_window(self, store):
        f2 = frame(seq=2, ts=2000)
        f1 = frame(seq=1, ts=1000)
        f3 = frame(seq=3, ts=2000, sensor="A1.vib")
        for f in (f2, f1, f3):
            store.append(f)
        got = store.query("A1", None, (1000, 2000))
        assert got == [f1, f2, f3]  # ts ascending, seq tie-break

    def test_empty_window(self, store):
        store.append(frame(ts=5000))
        assert store.query("A1", None, (0, 100)) == []

    def test_invalid_range(self, store):
        with pytest.raises(InvalidRange):
            store.query("A1", None, (10, 5))

    def test_substitution_linkage(self, store):
        original = frame(seq=4, ts=100, value=90.0)
        sub = SubstitutionRecord(
            original=original, substituted_value=5.0, method="rolling-median", at=100
        )
        stored = frame(seq=4, ts=100, value=5.0)
        store.append(stored, substitution=sub)
        assert store.substitution_for("A1.temp", 4).substituted_value == 5.0
        assert store.substitution_for("A1.temp", 99) is None

    def test_hot_log_is_wire_format(self, store, tmp_path):
        f = frame(ts=1234)
        store.append(f)
        store.checkpoint()
        assert load_frames(tmp_path / "data" / "hot.log") == [f]


class TestRetention:
    def policy(self):
        return RetentionPolicy(
            hot_window_hours=24.0, archive_window_hours=720.0, drop_after_hours=2000.0
        )

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError):
            RetentionPolicy(hot_window_hours=10.0, archive_window_hours=5.0, drop_after_hours=20.0)

    def test_old_frames_archived_fresh_untouched(self, store):
        now = hours_to_ms(10_000.0)
        old = frame(seq=0, ts=now - hours_to_ms(31 * 24.0))
        fresh = frame(seq=1, ts=now - hours_to_ms(1.0))
        store.append(old)
        store.append(fresh)
        archived, dropped = store.apply_retention(
            RetentionPolicy(24.0, 30 * 24.0, 9000.0), now
        )
        assert (archived, dropped) == (1, 0)
        assert store.query("A1", None, (0, now)) == [old, fresh]  # still queryable
        assert len(store.segments) == 1
        store.verify_archives()

    def test_idempotent_for_fixed_now(self, store):
        now = hours_to_ms(10_000.0)
        store.append(frame(seq=0, ts=now - hours_to_ms(31 * 24.0)))
        first = store.apply_retention(RetentionPolicy(24.0, 30 * 24.0, 9000.0), now)
        second = store.apply_retention(RetentionPolicy(24.0, 30 * 24.0, 9000.0), now)
        assert first == (1, 0)
        assert second == (0, 0)

    def test_drop_removes_and_blocks_replay(self, store):
        now = hours_to_ms(10_000.0)
        ancient = frame(seq=0, ts=now - hours_to_ms(2100.0))
        recent = frame(seq=1, ts=now - hours_to_ms(1.0))
        store.append(ancient)
        store.append(recent)
        archived, dropped = store.apply_retention(self.policy(), now)
        assert dropped == 1
        with pytest.raises(RangeUnavailable):
            store.replay((0, now), lambda f: None)
        got = []
        store.replay((now - hours_to_ms(100.0), now), got.append)
        assert got == [recent]

    def test_segment_ranges_disjoint(self, store):
        t0 = hours_to_ms(1000.0)
        for i in range(4):
            store.append(frame(seq=i, ts=t0 + hours_to_ms(float(i * 200))))
        store.apply_retention(RetentionPolicy(1.0, 300.0, 10_000.0), t0 + hours_to_ms(800.0))
        store.apply_retention(RetentionPolicy(1.0, 300.0, 10_000.0), t0 + hours_to_ms(1200.0))
        segs = store.segments
        assert len(segs) == 2
        assert segs[0].end_ts < segs[1].start_ts or segs[0].start_ts > segs[1].end_ts

    def test_checksum_audit_detects_tamper(self, store, tmp_path):
        now = hours_to_ms(10_000.0)
        store.append(frame(seq=0, ts=now - hours_to_ms(31 * 24.0)))
        store.apply_retention(RetentionPolicy(24.0, 30 * 24.0, 9000.0), now)
        seg_path = tmp_path / "data" / "archive" / "segment-000000.log"
        seg_path.write_bytes(seg_path.read_bytes().replace(b"5.0", b"6.0"))
        with pytest.raises(Exception, match="checksum"):
            store.verify_archives()


class TestReplay:
    def test_order_preserved(self, store):
        frames = [frame(seq=i, ts=i * 1000) for i in range(5)]
        for f in frames:
            store.append(f)
        got = []
        store.replay((None, None), got.append)
        assert got == frames

    def test_substituted_frames_reconstruct_original_values(self, store):
        original = frame(seq=0, ts=100, value=90.0)
        sub = SubstitutionRecord(
            original=original, substituted_value=5.0, method="rolling-median", at=100
        )
        store.append(frame(seq=0, ts=100, value=5.0), substitution=sub)
        got = []
        store.replay((None, None), got.append)
        assert got == [original]
        got_clean = []
        store.replay((None, None), got_clean.append, original_values=False)
        assert got_clean[0].value == 5.0

    def test_empty_range_succeeds(self, store):
        store.append(frame(seq=0, ts=5000))
        got = []
        assert store.replay((0, 100), got.append) == 0
        assert got == []


class TestJournals:
    def test_canonical_lines(self, store, tmp_path):
        store.append_journal("anomalies", {"b": 2, "a": 1})
        store.append_journal("anomalies", {"c": None})
        lines = (tmp_path / "data" / "journal" / "anomalies.jsonl").read_bytes()
        assert lines == b'{"a":1,"b":2}\n{"c":null}\n'

    def test_quarantine_reason_column(self, store, tmp_path):
        line = encode_frame(frame())
        store.quarantine(line, "stale")
        content = (tmp_path / "data" / "quarantine.log").read_bytes()
        assert content.endswith(b"\tstale\n")
        assert content.startswith(line)
