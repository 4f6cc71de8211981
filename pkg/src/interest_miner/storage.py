"""Append-only event-log storage.

One log file per (test, image, user) stream, laid out as
``<root>/<test>/<image>/<user>.log`` with one newline-terminated JSON record
per event: ``{"seq":0,"kind":"zoom","t":0,"x0":0,"y0":0,"x1":100,"y1":80}``
(field order fixed, integer fields, UTF-8; ``session_end`` records omit the
corner fields).  Appends flush before acknowledging, so replay returns exactly
the acknowledged records in order; a torn tail from a crash is detected,
reported to readers, and truncated away before the next append.

Phase-2 mark rectangles live in the same substrate under
``<root>/<test>/<image>/marks/<user>.log`` as kind="mark" records whose ``t``
is the submission index; the latest submission wins.

Key components are percent-encoded into filenames (no path separators survive,
distinct raw ids never collide, and directory listings decode back to raw ids).
"""

from __future__ import annotations

import io
import json
import os
import tarfile
import threading
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote, unquote

from .engine import BoundingBox, EventKind, ImageMeta, OrderViolationError, ViewportEvent


class StreamNotFoundError(LookupError):
    pass


class CorruptLogError(ValueError):
    """A non-tail record failed to parse; the log needs operator attention."""


class ImageConflictError(ValueError):
    """Image re-registered with different dimensions."""


def _encode(component: str) -> str:
    if not component:
        raise ValueError("stream key components must be non-empty")
    return quote(component, safe="-._~")


@dataclass(frozen=True, slots=True)
class StreamKey:
    test_id: str
    image_id: str
    user_id: str

    def __post_init__(self) -> None:
        for part in (self.test_id, self.image_id, self.user_id):
            if not part:
                raise ValueError("stream key components must be non-empty")


@dataclass(frozen=True, slots=True)
class EventRecord:
    key: StreamKey
    seq: int
    event: ViewportEvent


def _record_line(seq: int, event: ViewportEvent) -> bytes:
    fields: dict[str, int | str] = {"seq": seq, "kind": event.kind.value, "t": event.t}
    if event.bbox is not None:
        fields.update(x0=event.bbox.x0, y0=event.bbox.y0, x1=event.bbox.x1, y1=event.bbox.y1)
    return json.dumps(fields, separators=(",", ":")).encode() + b"\n"


def _parse_line(line: bytes) -> tuple[int, ViewportEvent]:
    fields = json.loads(line)
    kind = EventKind(fields["kind"])
    bbox = None
    if "x0" in fields:
        bbox = BoundingBox(fields["x0"], fields["y0"], fields["x1"], fields["y1"])
    return fields["seq"], ViewportEvent(kind, fields["t"], bbox)


class _StreamState:
    __slots__ = ("lock", "next_seq", "last_t", "handle")

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.next_seq: int | None = None  # unknown until first scan
        self.last_t = -1
        self.handle = None


class EventStore:
    """Durable per-stream logs under a root directory.

    Thread-safe within one process: a per-stream lock serializes same-stream
    appends, distinct streams append concurrently.  With ``fsync`` (default)
    every append is flushed to disk before it is acknowledged.
    """

    def __init__(self, root: str | Path, fsync: bool = True) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self._states: dict[Path, _StreamState] = {}
        self._registry_lock = threading.Lock()

    # -- paths ------------------------------------------------------------

    def _events_path(self, key: StreamKey) -> Path:
        return self.root / _encode(key.test_id) / _encode(key.image_id) / (
            _encode(key.user_id) + ".log"
        )

    def _marks_path(self, key: StreamKey) -> Path:
        return self.root / _encode(key.test_id) / _encode(key.image_id) / "marks" / (
            _encode(key.user_id) + ".log"
        )

    def _state(self, path: Path) -> _StreamState:
        with self._registry_lock:
            state = self._states.get(path)
            if state is None:
                state = self._states[path] = _StreamState()
            return state

    # -- scanning ---------------------------------------------------------

    @staticmethod
    def _scan_file(path: Path) -> tuple[list[tuple[int, ViewportEvent]], bool, int]:
        """(records, truncated_tail, clean_byte_length) for one log file."""
        data = path.read_bytes()
        records: list[tuple[int, ViewportEvent]] = []
        offset = 0
        truncated = False
        while offset < len(data):
            newline = data.find(b"\n", offset)
            if newline < 0:
                truncated = True  # tail never got its newline: torn write
                break
            try:
                records.append(_parse_line(data[offset : newline + 1]))
            except (ValueError, KeyError) as exc:
                raise CorruptLogError(f"{path}: unreadable record at byte {offset}") from exc
            offset = newline + 1
        return records, truncated, offset

    def _prepare(self, path: Path, state: _StreamState) -> None:
        """Load tail state, truncating any torn record left by a crash."""
        if state.next_seq is not None:
            return
        if path.exists():
            records, truncated, clean_len = self._scan_file(path)
            if truncated:
                with open(path, "rb+") as f:
                    f.truncate(clean_len)
            state.next_seq = records[-1][0] + 1 if records else 0
            state.last_t = records[-1][1].t if records else -1
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            state.next_seq = 0

    def _write(self, path: Path, state: _StreamState, lines: list[bytes]) -> None:
        if state.handle is None:
            state.handle = open(path, "ab")
        state.handle.write(b"".join(lines))
        state.handle.flush()
        if self.fsync:
            os.fsync(state.handle.fileno())

    # -- events -----------------------------------------------------------

    def append(self, key: StreamKey, event: ViewportEvent) -> int:
        return self.append_batch(key, [event])[0]

    def append_batch(self, key: StreamKey, events: list[ViewportEvent]) -> list[int]:
        """Append validated events as one atomic batch; returns their seqs.

        The whole batch is checked against the stream tail before any byte is
        written, so a rejected batch leaves the stream untouched.
        """
        if not events:
            return []
        path = self._events_path(key)
        state = self._state(path)
        with state.lock:
            self._prepare(path, state)
            last_t = state.last_t
            for event in events:
                if event.kind is EventKind.MARK:
                    raise ValueError("mark records belong to the marks stream")
                if event.t < last_t:
                    raise OrderViolationError(
                        f"timestamp {event.t} precedes stream tail at {last_t}"
                    )
                last_t = event.t
            seqs = list(range(state.next_seq, state.next_seq + len(events)))
            self._write(path, state, [_record_line(s, e) for s, e in zip(seqs, events)])
            state.next_seq = seqs[-1] + 1
            state.last_t = last_t
            return seqs

    def replay(self, key: StreamKey) -> list[EventRecord]:
        """All acknowledged records in seq order; unknown stream raises."""
        records, _ = self.scan(key)
        return records

    def scan(self, key: StreamKey) -> tuple[list[EventRecord], bool]:
        """Like replay, but also reports whether a torn tail was skipped."""
        path = self._events_path(key)
        if not path.exists():
            raise StreamNotFoundError(f"no event stream for {key}")
        parsed, truncated, _ = self._scan_file(path)
        return [EventRecord(key, seq, event) for seq, event in parsed], truncated

    def has_events(self, key: StreamKey) -> bool:
        return self._events_path(key).exists()

    def list_streams(self, test_id: str, image_id: str) -> list[StreamKey]:
        image_dir = self.root / _encode(test_id) / _encode(image_id)
        if not image_dir.is_dir():
            return []
        keys = [
            StreamKey(test_id, image_id, unquote(p.name[: -len(".log")]))
            for p in image_dir.iterdir()
            if p.is_file() and p.name.endswith(".log")
        ]
        return sorted(keys, key=lambda k: k.user_id)

    def list_images(self, test_id: str) -> list[str]:
        test_dir = self.root / _encode(test_id)
        if not test_dir.is_dir():
            return []
        return sorted(unquote(p.name) for p in test_dir.iterdir() if p.is_dir())

    # -- marks ------------------------------------------------------------

    def append_marks(self, key: StreamKey, rects: list[BoundingBox]) -> int:
        """Persist one phase-2 submission; later submissions shadow earlier."""
        if not rects:
            raise ValueError("a marks submission needs at least one rectangle")
        path = self._marks_path(key)
        state = self._state(path)
        with state.lock:
            self._prepare(path, state)
            submission = state.last_t + 1
            events = [ViewportEvent(EventKind.MARK, submission, r) for r in rects]
            seqs = range(state.next_seq, state.next_seq + len(events))
            self._write(path, state, [_record_line(s, e) for s, e in zip(seqs, events)])
            state.next_seq = state.next_seq + len(events)
            state.last_t = submission
            return len(rects)

    def latest_marks(self, key: StreamKey) -> list[BoundingBox]:
        """Rectangles of the most recent submission; empty when none exist."""
        path = self._marks_path(key)
        if not path.exists():
            return []
        parsed, _, _ = self._scan_file(path)
        if not parsed:
            return []
        latest = parsed[-1][1].t
        return [e.bbox for _, e in parsed if e.t == latest and e.bbox is not None]

    def has_marks(self, key: StreamKey) -> bool:
        return bool(self.latest_marks(key))

    # -- lifecycle / archive ------------------------------------------------

    def flush(self) -> None:
        with self._registry_lock:
            states = list(self._states.values())
        for state in states:
            with state.lock:
                if state.handle is not None:
                    state.handle.flush()
                    os.fsync(state.handle.fileno())

    def close(self) -> None:
        with self._registry_lock:
            states, self._states = list(self._states.values()), {}
        for state in states:
            with state.lock:
                if state.handle is not None:
                    state.handle.close()
                    state.handle = None

    def export_test(self, test_id: str, archive_path: str | Path, registry: "ImageRegistry | None" = None) -> Path:
        """Pack one test's streams (plus image dimensions) into a tar.gz."""
        test_dir = self.root / _encode(test_id)
        if not test_dir.is_dir():
            raise StreamNotFoundError(f"no data for test {test_id!r}")
        archive_path = Path(archive_path)
        archive_path.parent.mkdir(parents=True, exist_ok=True)
        with tarfile.open(archive_path, "w:gz") as tar:
            tar.add(test_dir, arcname=_encode(test_id))
            if registry is not None:
                images = {
                    m.image_id: {"width": m.width, "height": m.height}
                    for image_id in self.list_images(test_id)
                    if (m := registry.get(image_id)) is not None
                }
                manifest = json.dumps(images, separators=(",", ":")).encode()
                info = tarfile.TarInfo("images.json")
                info.size = len(manifest)
                tar.addfile(info, io.BytesIO(manifest))
        return archive_path

    def import_test(self, archive_path: str | Path, registry: "ImageRegistry | None" = None) -> None:
        """Unpack an exported test into this store's root."""
        with tarfile.open(archive_path, "r:gz") as tar:
            for member in tar.getmembers():
                name = Path(member.name)
                if name.is_absolute() or ".." in name.parts:
                    raise ValueError(f"unsafe archive member {member.name!r}")
            manifest = None
            try:
                extracted = tar.extractfile("images.json")
                if extracted is not None:
                    manifest = json.load(extracted)
            except KeyError:
                pass
            members = [m for m in tar.getmembers() if m.name != "images.json"]
            tar.extractall(self.root, members=members)
        if manifest and registry is not None:
            for image_id, dims in manifest.items():
                registry.register(image_id, dims["width"], dims["height"])


class ImageRegistry:
    """Image dimensions keyed by image id, persisted as one JSON file."""

    def __init__(self, root: str | Path) -> None:
        self.path = Path(root) / "images.json"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _load(self) -> dict[str, dict[str, int]]:
        if not self.path.exists():
            return {}
        return json.loads(self.path.read_text())

    def register(self, image_id: str, width: int, height: int) -> ImageMeta:
        meta = ImageMeta(image_id, width, height)
        with self._lock:
            images = self._load()
            known = images.get(image_id)
            if known and (known["width"] != width or known["height"] != height):
                raise ImageConflictError(
                    f"{image_id!r} already registered as "
                    f"{known['width']}x{known['height']}"
                )
            images[image_id] = {"width": width, "height": height}
            tmp = self.path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(images, indent=2, sort_keys=True))
            os.replace(tmp, self.path)
        return meta

    def get(self, image_id: str) -> ImageMeta | None:
        dims = self._load().get(image_id)
        return ImageMeta(image_id, dims["width"], dims["height"]) if dims else None

    def require(self, image_id: str) -> ImageMeta:
        meta = self.get(image_id)
        if meta is None:
            raise StreamNotFoundError(f"image {image_id!r} is not registered")
        return meta
