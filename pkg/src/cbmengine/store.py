"""Append-only telemetry persistence with retention, archival, and replay.

On disk the store is a segmented log of wire-format lines: a hot log,
archive segments (each with a sidecar of range, count, and a 64-bit digest),
a quarantine log (wire line plus a tab-separated reason), and JSON-lines
journals for anomalies, substitutions, and configuration changes. Replay
delivers frames in exactly stored order, re-injecting original values for
substituted frames so a re-run of detection reproduces the anomaly journal
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .ingest import SubstitutionRecord
from .units import hours_to_ms
from .wire import TelemetryFrame, decode_frame, encode_frame


class StorageFull(Exception):
    """Configured frame quota exceeded."""


class IoFailure(Exception):
    """Underlying filesystem failure."""


class InvalidRange(Exception):
    """Query window with start after end."""


class RangeUnavailable(Exception):
    """Requested range reaches into dropped data."""


@dataclass(frozen=True)
class RetentionPolicy:
    hot_window_hours: float = 30 * 24.0
    archive_window_hours: float = 2 * 365 * 24.0
    drop_after_hours: float = 7 * 365 * 24.0

    def __post_init__(self) -> None:
        if not (
            0 < self.hot_window_hours
            <= self.archive_window_hours
            <= self.drop_after_hours
        ):
            raise ValueError("retention windows must satisfy hot <= archive <= drop")


@dataclass(frozen=True)
class ArchiveSegment:
    start_ts: int
    end_ts: int
    frame_count: int
    checksum: int  # 64-bit digest of the segment file bytes
    path: str


def _digest64(data: bytes) -> int:
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


def canonical_json(obj) -> str:
    """Compact JSON with stable key order for journals and reports."""
    return json.dumps(obj, separators=(",", ":"), sort_keys=True, allow_nan=False)


@dataclass
class _Stored:
    frame: TelemetryFrame
    archived: bool = False


class FrameStore:
    """Single writer per sensor lane; readers see immutable history."""

    def __init__(self, data_dir, max_frames: Optional[int] = None):
        self.data_dir = Path(data_dir)
        self.max_frames = max_frames
        try:
            (self.data_dir / "archive").mkdir(parents=True, exist_ok=True)
            (self.data_dir / "journal").mkdir(parents=True, exist_ok=True)
            self._hot_path = self.data_dir / "hot.log"
            self._hot_fh = open(self._hot_path, "ab")
            self._quarantine_fh = open(self.data_dir / "quarantine.log", "ab")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._frames: List[_Stored] = []
        self._seen: set = set()
        self._substitutions: Dict[Tuple[str, int], SubstitutionRecord] = {}
        self._segments: List[ArchiveSegment] = []
        self._archived_until: Optional[int] = None  # exclusive ts watermark
        self._dropped_until: Optional[int] = None
        self._journal_fhs: Dict[str, object] = {}

    # -- frame log ----------------------------------------------------------

    def append(
        self, frame: TelemetryFrame, substitution: Optional[SubstitutionRecord] = None
    ) -> None:
        """Durable, idempotent append of an accepted/substituted frame."""
        key = (frame.asset, frame.sensor, frame.seq)
        if key in self._seen:
            return
        if self.max_frames is not None and len(self._frames) >= self.max_frames:
            raise StorageFull(f"frame quota {self.max_frames} reached")
        try:
            self._hot_fh.write(encode_frame(frame) + b"\n")
            self._hot_fh.flush()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._seen.add(key)
        self._frames.append(_Stored(frame=frame))
        if substitution is not None:
            self._substitutions[(frame.sensor, frame.seq)] = substitution
            self.append_journal(
                "substitutions",
                {
                    "sensor": frame.sensor,
                    "seq": frame.seq,
                    "at": substitution.at,
                    "method": substitution.method,
                    "substituted_value": substitution.substituted_value,
                    "original_value": substitution.original.value,
                },
            )

    def quarantine(self, line: bytes, reason: str) -> None:
        try:
            self._quarantine_fh.write(line.rstrip(b"\n") + b"\t" + reason.encode() + b"\n")
            self._quarantine_fh.flush()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def substitution_for(self, sensor: str, seq: int) -> Optional[SubstitutionRecord]:
        return self._substitutions.get((sensor, seq))

    def query(
        self, asset: str, channel_kind: Optional[str], window: Tuple[int, int]
    ) -> List[TelemetryFrame]:
        """Frames in [start, end], ascending ts with seq tie-break."""
        start, end = window
        if start > end:
            raise InvalidRange(f"start {start} after end {end}")
        out = [
            s.frame
            for s in self._frames
            if s.frame.asset == asset
            and (channel_kind is None or s.frame.channel_kind == channel_kind)
            and start <= s.frame.ts <= end
        ]
        out.sort(key=lambda f: (f.ts, f.seq))
        return out

    def frame_count(self) -> int:
        return len(self._frames)

    # -- retention ----------------------------------------------------------

    def apply_retention(self, policy: RetentionPolicy, now_ms: int) -> Tuple[int, int]:
        """Archive frames older than the archive window, drop the expired.

        Idempotent for a fixed `now`; archive segment ranges stay disjoint
        because each pass advances the archive watermark.
        """
        archive_cut = now_ms - hours_to_ms(policy.archive_window_hours)
        drop_cut = now_ms - hours_to_ms(policy.drop_after_hours)

        dropped = 0
        kept: List[_Stored] = []
        for stored in self._frames:
            if stored.frame.ts < drop_cut:
                dropped += 1
            else:
                kept.append(stored)
        if dropped:
            self._frames = kept
            self._dropped_until = drop_cut
            self._segments = [s for s in self._segments if s.end_ts >= drop_cut]
            self._rewrite_archive_dir()

        to_archive = [
            s for s in self._frames if not s.archived and s.frame.ts < archive_cut
        ]
        if to_archive:
            lines = b"".join(encode_frame(s.frame) + b"\n" for s in to_archive)
            seg_idx = len(self._segments)
            seg_path = self.data_dir / "archive" / f"segment-{seg_idx:06d}.log"
            lo = self._archived_until if self._archived_until is not None else min(
                s.frame.ts for s in to_archive
            )
            segment = ArchiveSegment(
                start_ts=lo,
                end_ts=archive_cut - 1,
                frame_count=len(to_archive),
                checksum=_digest64(lines),
                path=str(seg_path),
            )
            try:
                seg_path.write_bytes(lines)
                seg_path.with_suffix(".json").write_text(
                    canonical_json(
                        {
                            "start_ts": segment.start_ts,
                            "end_ts": segment.end_ts,
                            "frame_count": segment.frame_count,
                            "checksum": segment.checksum,
                        }
                    )
                )
            except OSError as exc:
                raise IoFailure(str(exc)) from exc
            for s in to_archive:
                s.archived = True
            self._segments.append(segment)
            self._archived_until = archive_cut
            self._rewrite_hot()
        return len(to_archive), dropped

    def _rewrite_hot(self) -> None:
        try:
            self._hot_fh.close()
            tmp = self._hot_path.with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                for s in self._frames:
                    if not s.archived:
                        fh.write(encode_frame(s.frame) + b"\n")
            os.replace(tmp, self._hot_path)
            self._hot_fh = open(self._hot_path, "ab")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def _rewrite_archive_dir(self) -> None:
        # Drop segment files that fell wholly past the drop cutoff.
        live = {Path(s.path) for s in self._segments}
        for path in (self.data_dir / "archive").glob("segment-*.log"):
            if path not in live:
                path.unlink(missing_ok=True)
                path.with_suffix(".json").unlink(missing_ok=True)

    def verify_archives(self) -> None:
        """Checksum audit over every archive segment."""
        for seg in self._segments:
            data = Path(seg.path).read_bytes()
            if _digest64(data) != seg.checksum:
                raise IoFailure(f"checksum mismatch in {seg.path}")

    @property
    def segments(self) -> Tuple[ArchiveSegment, ...]:
        return tuple(self._segments)

    # -- replay -------------------------------------------------------------

    def replay(
        self,
        window: Tuple[Optional[int], Optional[int]],
        sink: Callable[[TelemetryFrame], None],
        *,
        original_values: bool = True,
    ) -> int:
        """Deliver stored frames in append order to `sink`.

        With `original_values`, substituted frames are reconstructed to
        their pre-screening values so the full ingest+detection pipeline
        replays exactly. Raises RangeUnavailable when the window reaches
        into dropped data.
        """
        start, end = window
        if start is not None and end is not None and start > end:
            raise InvalidRange(f"start {start} after end {end}")
        if (
            self._dropped_until is not None
            and (start is None or start < self._dropped_until)
        ):
            raise RangeUnavailable(
                f"data before {self._dropped_until} has been dropped"
            )
        self.verify_archives()
        n = 0
        for stored in self._frames:
            frame = stored.frame
            if start is not None and frame.ts < start:
                continue
            if end is not None and frame.ts > end:
                continue
            if original_values:
                sub = self._substitutions.get((frame.sensor, frame.seq))
                if sub is not None:
                    frame = sub.original
            sink(frame)
            n += 1
        return n

    # -- journals -----------------------------------------------------------

    def journal_path(self, name: str) -> Path:
        return self.data_dir / "journal" / f"{name}.jsonl"

    def append_journal(self, name: str, obj: Dict) -> None:
        fh = self._journal_fhs.get(name)
        if fh is None:
            try:
                fh = open(self.journal_path(name), "ab")
            except OSError as exc:
                raise IoFailure(str(exc)) from exc
            self._journal_fhs[name] = fh
        try:
            fh.write(canonical_json(obj).encode("utf-8") + b"\n")
            fh.flush()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    # -- lifecycle ----------------------------------------------------------

    def checkpoint(self) -> None:
        try:
            self._hot_fh.flush()
            os.fsync(self._hot_fh.fileno())
            for fh in self._journal_fhs.values():
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def close(self) -> None:
        try:
            self.checkpoint()
        finally:
            self._hot_fh.close()
            self._quarantine_fh.close()
            for fh in self._journal_fhs.values():
                fh.close()
            self._journal_fhs.clear()

    def __enter__(self) -> "FrameStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_frames(path) -> List[TelemetryFrame]:
    """Decode a replay file (or hot/archive log) of wire-format lines."""
    frames = []
    with open(path, "rb") as fh:
        for line in fh:
            if line.strip():
                frames.append(decode_frame(line))
    return frames
