"""Line-delimited execution traces.

One record per line: ``time<TAB>pid<TAB>kind<TAB>payload``.  Header lines are
prefixed ``#`` and echo the resolved configuration, so a trace is
self-describing and replays to the same monitor verdicts.  Floats are written
with repr so repeated seeded runs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO

KIND_EVENT = "event"
KIND_GRANT = "grant"
KIND_MSG = "msg"
KIND_POSE = "pose"
KIND_MONITOR = "monitor"

# rank used to keep records strictly ordered by (time, pid, kind)
KIND_ORDER = {
    KIND_EVENT: 0,
    KIND_GRANT: 1,
    KIND_MSG: 2,
    KIND_POSE: 3,
    KIND_MONITOR: 4,
}


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time: float
    pid: int
    kind: str
    payload: str

    def sort_key(self):
        return (self.time, self.pid, KIND_ORDER[self.kind])

    def fields(self) -> dict[str, str]:
        """Split a ``key=value`` payload into a dict."""
        out = {}
        for part in self.payload.split():
            if "=" in part:
                k, _, v = part.partition("=")
                out[k] = v
        return out


def format_record(rec: TraceRecord) -> str:
    return f"{rec.time!r}\t{rec.pid}\t{rec.kind}\t{rec.payload}"


def parse_record(line: str) -> TraceRecord:
    parts = line.rstrip("\n").split("\t", 3)
    if len(parts) != 4:
        raise TraceError(f"malformed trace line: {line!r}")
    t, pid, kind, payload = parts
    if kind not in KIND_ORDER:
        raise TraceError(f"unknown record kind {kind!r}")
    try:
        return TraceRecord(float(t), int(pid), kind, payload)
    except ValueError as exc:
        raise TraceError(f"malformed trace line: {line!r}") from exc


class TraceWriter:
    def __init__(self, out: TextIO, header: Iterable[tuple[str, str]] = ()):
        self.out = out
        self._last_key = None
        for key, value in header:
            out.write(f"# {key}: {value}\n")

    def write(self, rec: TraceRecord) -> None:
        key = rec.sort_key()
        if self._last_key is not None and key <= self._last_key:
            raise TraceError(f"records out of order: {key} after {self._last_key}")
        self._last_key = key
        self.out.write(format_record(rec) + "\n")

    def write_batch(self, recs: list[TraceRecord]) -> None:
        for rec in sorted(recs, key=TraceRecord.sort_key):
            self.write(rec)


def read_trace(path) -> tuple[dict[str, str], list[TraceRecord]]:
    """Parse a trace file into (header dict, records)."""
    header: dict[str, str] = {}
    records: list[TraceRecord] = []
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line.lstrip("# ")
            key, _, value = body.partition(":")
            if key:
                header[key.strip()] = value.strip()
            continue
        records.append(parse_record(line))
    return header, records


def iter_kind(records: Iterable[TraceRecord], kind: str) -> Iterator[TraceRecord]:
    return (r for r in records if r.kind == kind)


def pose_payload(x: float, y: float, z: float, yaw: float) -> str:
    return f"{x!r} {y!r} {z!r} {yaw!r}"


def parse_pose(payload: str) -> tuple[float, float, float, float]:
    parts = payload.split()
    if len(parts) != 4:
        raise TraceError(f"malformed pose payload {payload!r}")
    x, y, z, yaw = (float(p) for p in parts)
    return x, y, z, yaw
