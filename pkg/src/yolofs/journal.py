"""Append-only directory journal.

Records one line per override-tree change plus snapshot/travel markers:

    S\t<path>\t<ino>     stage <path> as store entry <ino>
    R\t<src>\t<dst>      rename <src> to <dst>
    D\t<path>            delete <path>
    P\t<name>            snapshot marker
    T\t<name>\t<gen>     travel marker targeting an earlier generation

Appends are flushed to stable storage before the triggering operation
reports success.  The file is never read back on the hot path; parsing,
segment liveness, and tree reconstruction below serve travel, diff, audit,
and commit.  A torn trailing line (crash mid-append) is dropped on parse.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

from yolofs import core
from yolofs.errors import CorruptJournal, SessionError
from yolofs.tree import OverrideTree

ACTION_TAGS = ("S", "R", "D")
MARKER_TAGS = ("P", "T")


@dataclass(frozen=True)
class Marker:
    gen: int  # generation this marker received (1-based file order)
    tag: str  # "P" | "T"
    label: str
    target: int | None = None  # travel markers only


class GenerationCounter:
    """Global generation, incremented by exactly one per marker."""

    def __init__(self, value=0):
        self.value = value
        self._lock = threading.Lock()

    def bump(self):
        with self._lock:
            self.value += 1
            return self.value


class Journal:
    """Durable appender over `.yolo/journal`."""

    def __init__(self, path, gen: GenerationCounter):
        self.path = os.fspath(path)
        self.gen = gen
        self._lock = threading.Lock()
        self._fd = os.open(self.path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o600)

    def append_action(self, record):
        if record[0] not in ACTION_TAGS:
            raise SessionError(f"not an action record: {record[0]!r}")
        data = core.encode_record(record)
        with self._lock:
            os.write(self._fd, data)
            os.fsync(self._fd)

    def append_marker(self, tag, label, target=None):
        """Append a P or T marker; returns the generation it received."""
        if not label:
            raise SessionError("marker label must be non-empty")
        with self._lock:
            new_gen = self.gen.value + 1
            if tag == "P":
                record = ("P", label)
            elif tag == "T":
                if target is None or not (0 <= target < new_gen):
                    raise SessionError(
                        f"travel target {target!r} not below generation {new_gen}"
                    )
                record = ("T", label, target)
            else:
                raise SessionError(f"not a marker tag: {tag!r}")
            os.write(self._fd, core.encode_record(record))
            os.fsync(self._fd)
            return self.gen.bump()

    def read_bytes(self):
        with open(self.path, "rb") as f:
            return f.read()

    def records(self):
        records, _ = parse(self.read_bytes())
        return records

    def reset(self):
        with self._lock:
            os.ftruncate(self._fd, 0)
            os.fsync(self._fd)

    def close(self):
        with self._lock:
            if self._fd >= 0:
                os.close(self._fd)
                self._fd = -1


def parse(data):
    """Decode journal bytes to ([records], dropped_line_count).

    All complete lines must decode; a final unterminated line is dropped and
    counted (torn append).  Raises CorruptJournal with the 1-based line
    number on structurally invalid complete lines.
    """
    records = []
    dropped = 0
    if not data:
        return records, dropped
    lines = data.split(b"\n")
    tail = lines.pop()  # b"" when data ends with LF
    if tail:
        dropped = 1
    for i, raw in enumerate(lines, start=1):
        try:
            records.append(core.decode_line(raw.decode("utf-8")))
        except (ValueError, UnicodeDecodeError) as e:
            raise CorruptJournal(str(e), line=i) from None
    return records, dropped


def split_segments(records):
    """Partition records into (segments, markers).

    segments[g] holds the action records appended while the session was at
    generation g; markers belong to no segment.  len(segments) is always
    len(markers) + 1 (the open segment may be empty).
    """
    segments = [[]]
    markers = []
    for rec in records:
        tag = rec[0]
        if tag == "P":
            markers.append(Marker(len(markers) + 1, "P", rec[1]))
            segments.append([])
        elif tag == "T":
            gen = len(markers) + 1
            target = rec[2]
            if not (0 <= target < gen):
                raise CorruptJournal(
                    f"travel marker at generation {gen} targets {target}"
                )
            markers.append(Marker(gen, "T", rec[1], target))
            segments.append([])
        else:
            segments[-1].append(rec)
    return segments, markers


def liveness(records, query_gen=None):
    """Generations of the segments composing the state at `query_gen`.

    Every marker g snapshots the state the session held the instant it was
    appended (its *arrival* state: everything live before it plus the
    segment it closes).  A snapshot marker leaves the state unchanged; a
    travel marker targeting t resets the state to marker t's arrival state,
    killing the segments in between — they stay in the journal and a later
    travel can bring them back.

    `query_gen=g` is the state the session held while at generation g (after
    marker g's effect); `query_gen=None` is the current state, which also
    includes the open segment after the last marker.
    """
    _, markers = split_segments(records)
    m = len(markers)
    if query_gen is not None and not (0 <= query_gen <= m):
        raise SessionError(f"generation {query_gen} out of range (0..{m})")
    post = [[]]  # post[g]: state while at generation g
    arrivals = [[]]  # arrivals[g]: state marker g snapshotted (arrivals[0] = start)
    for g in range(1, m + 1):
        arrival = post[g - 1] + [g - 1]
        arrivals.append(arrival)
        marker = markers[g - 1]
        post.append(arrival if marker.tag == "P" else arrivals[marker.target])
    if query_gen is None:
        return post[m] + [m]
    return post[query_gen]


def reconstruct(records, target_gen=None):
    """Rebuild the override tree at a generation (None = current state).

    Replays the live segments in order; staged entries take the generation
    of the segment that staged them, so post-travel writes copy-on-write
    instead of mutating preserved versions.
    """
    segments, _ = split_segments(records)
    tree = OverrideTree()
    for g in liveness(records, target_gen):
        for rec in segments[g]:
            try:
                tree.apply(rec, g)
            except Exception as e:
                raise CorruptJournal(f"segment {g}: cannot apply {rec!r}: {e}") from e
    return tree
