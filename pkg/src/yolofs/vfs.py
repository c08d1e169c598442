"""The interposition layer: a mounted session over one base directory.

Every operation consults the permission rules first (an `ask` blocks the
calling thread until a decision or timeout, holding no locks), then resolves
the path through the override tree and acts on the base or the staged store.
The base directory is never modified by mounted operations; only commit
touches it.  `.yolo/` (store, journal, control socket) lives inside the base
directory but is invisible and unreachable through the mount.

Session lifecycle (snapshot, travel, diff, commit, abort) lives here too;
the control daemon in `yolofs.session` is a transport wrapper around these
methods.
"""

from __future__ import annotations

import logging
import os
import shutil
import stat as stat_mod
import threading
from dataclasses import dataclass, field

from yolofs import journal as journal_mod
from yolofs import permissions as perm
from yolofs.errors import (
    AlreadyExists,
    InvalidPath,
    IsADir,
    NotADir,
    NotEmpty,
    NotFound,
    NotSupported,
    PermissionDenied,
    SessionError,
)
from yolofs.journal import GenerationCounter, Journal
from yolofs.permissions import AskBroker, RuleTree
from yolofs.store import FileStore
from yolofs.tree import OverrideTree

logger = logging.getLogger(__name__)

YOLO_DIR = ".yolo"


@dataclass
class OpenHandle:
    path: str
    fd: int
    writable: bool
    backing: str  # "base" | "staged"
    ino: int | None = None


@dataclass
class CommitSummary:
    applied: int = 0
    moved_files: int = 0
    bytes_moved: int = 0
    errors: list = field(default_factory=list)

    def as_dict(self):
        return {
            "applied": self.applied,
            "moved_files": self.moved_files,
            "bytes_moved": self.bytes_moved,
            "errors": self.errors,
        }


class MountSession:
    """Staging view over `base_root`; all state lives under base_root/.yolo."""

    def __init__(self, base_root, rules=None, broker=None, resume=True, enforce=True):
        self.base_root = os.path.abspath(os.fspath(base_root))
        if not os.path.isdir(self.base_root):
            raise SessionError(f"base root {self.base_root!r} is not a directory")
        self.yolo_dir = os.path.join(self.base_root, YOLO_DIR)
        os.makedirs(self.yolo_dir, exist_ok=True)
        self.gen = GenerationCounter()
        self.store = FileStore(self.yolo_dir)
        self.journal = Journal(os.path.join(self.yolo_dir, "journal"), self.gen)
        self.rules = rules if rules is not None else RuleTree()
        self.broker = broker if broker is not None else AskBroker()
        self.enforce = enforce  # benchmark kill-switch for the permission engine
        self.tree = OverrideTree()
        self._lock = threading.RLock()
        self.on_record = None  # daemon hook: called with each journaled action
        if resume:
            self._resume_from_journal()

    def _resume_from_journal(self):
        """Rebuild tree and generation from an existing journal (crash/restart)."""
        records = self.journal.records()
        if not records:
            return
        _, markers = journal_mod.split_segments(records)
        self.gen.value = len(markers)
        self.tree = journal_mod.reconstruct(records, None)
        logger.info(
            "resumed session: %d records, generation %d", len(records), self.gen.value
        )

    # ------------------------------------------------------------------
    # path plumbing

    def _parts(self, path):
        parts = OverrideTree._parts(path)
        if parts and parts[0] == YOLO_DIR:
            raise NotFound(path)
        return parts

    def _base_path(self, rel):
        return os.path.join(self.base_root, rel) if rel else self.base_root

    def _backing_path(self, res):
        if res[0] == "staged":
            return self.store.path_of(res[1])
        return self._base_path(res[1])

    def _resolve_existing(self, parts):
        """Composed existence: a base redirect only exists if the base does."""
        res = self.tree.resolve(parts)
        if res[0] == "absent":
            return None
        if res[0] == "base" and not os.path.lexists(self._base_path(res[1])):
            return None
        return res

    # ------------------------------------------------------------------
    # permissions

    def _require(self, parts, kind, process):
        if not self.enforce:
            return
        outcome = self.rules.check(parts, kind)
        if outcome == perm.ALLOWED:
            return
        if outcome == perm.NEEDS_ASK:
            request = perm.AskRequest("/".join(parts), kind, process)
            decision = self.broker.ask(request)
            if decision.install is not None:
                self.rules.set_rule(*decision.install)
            if decision.verdict == "allow":
                return
            raise PermissionDenied(f"{kind} {request.path!r} denied by ask")
        if outcome == perm.NOT_FOUND:
            raise NotFound("/".join(parts))
        raise PermissionDenied(f"{kind} {'/'.join(parts)!r} denied by rule")

    def _is_hidden(self, parts):
        return self.rules.effective(parts) == perm.HIDDEN

    # ------------------------------------------------------------------
    # read side

    def getattr(self, path, process="?"):
        """lstat of the resolved backing; returns (stat_result, origin)."""
        parts = self._parts(path)
        if parts:  # the mount root itself always stats (rules gate its entries)
            self._require(parts, perm.GETATTR, process)
        res = self.tree.resolve(parts)
        if res[0] == "absent":
            raise NotFound(path)
        try:
            return os.lstat(self._backing_path(res)), res[0]
        except OSError as e:
            raise NotFound(path) from e

    def readdir(self, path, process="?"):
        """Merged listing [(name, origin)]; hidden entries are omitted."""
        parts = self._parts(path)
        self._require(parts, perm.LIST, process)
        with self._lock:
            merged = self._merged_listing(parts)
        out = []
        for name, origin in merged:
            if not parts and name == YOLO_DIR:
                continue
            if self._is_hidden(parts + (name,)):
                continue
            out.append((name, origin))
        return out

    def readdir_types(self, path, process="?"):
        """[(name, d_type)] for the bridge: real types let directory walkers
        skip the per-entry stat round-trips."""
        out = []
        for name, _origin in self.readdir(path, process):
            res = self.tree.resolve(self._parts(path) + (name,))
            dtype = 0
            if res[0] != "absent":
                try:
                    mode = os.lstat(self._backing_path(res)).st_mode
                    dtype = (mode >> 12) & 0xF
                except OSError:
                    pass
            out.append((name, dtype))
        return out

    def _merged_listing(self, parts):
        res = self._resolve_existing(parts)
        if res is None:
            raise NotFound("/".join(parts))
        backing = self._backing_path(res)
        if not os.path.isdir(backing):
            raise NotADir("/".join(parts))
        base_entries = () if res[0] == "staged" else os.listdir(backing)
        return self.tree.merge_readdir(parts, base_entries)

    def readlink(self, path, process="?"):
        parts = self._parts(path)
        self._require(parts, perm.READ, process)
        res = self.tree.resolve(parts)
        if res[0] == "absent":
            raise NotFound(path)
        try:
            return os.readlink(self._backing_path(res))
        except OSError as e:
            raise NotFound(path) from e

    def access(self, path, want_write=False, want_read=False, process="?"):
        parts = self._parts(path)
        if not parts and not want_write:
            return
        kind = perm.WRITE if want_write else (perm.READ if want_read else perm.GETATTR)
        self._require(parts, kind, process)

    def statfs(self):
        return os.statvfs(self.base_root)

    # ------------------------------------------------------------------
    # open / io

    def open(
        self,
        path,
        write=False,
        trunc=False,
        create=False,
        excl=False,
        mode=0o644,
        process="?",
    ):
        parts = self._parts(path)
        if not parts:
            raise IsADir(path)
        if not write:
            self._require(parts, perm.READ, process)
            res = self.tree.resolve(parts)
            if res[0] == "absent":
                raise NotFound(path)
            backing = self._backing_path(res)
            if os.path.isdir(backing):
                raise IsADir(path)
            try:
                fd = os.open(backing, os.O_RDONLY)
            except OSError as e:
                raise NotFound(path) from e
            return OpenHandle(path, fd, False, res[0], res[1] if res[0] == "staged" else None)

        res = self._resolve_existing(parts)
        exists = res is not None
        if exists and create and excl:
            raise AlreadyExists(path)
        if not exists and not create:
            raise NotFound(path)
        # permission before any staging side effect: a denied write never copies
        self._require(parts, perm.WRITE if exists else perm.MUTATE, process)
        with self._lock:
            res = self._resolve_existing(parts)
            exists = res is not None
            if exists and create and excl:
                raise AlreadyExists(path)
            if not exists and not create:
                raise NotFound(path)
            if exists and res[0] == "staged":
                if os.path.isdir(self.store.path_of(res[1])):
                    raise IsADir(path)
                ino = self.store.ensure_current(res[1], res[2], self.gen.value)
                if ino != res[1]:
                    self._record(("S", "/".join(parts), ino))
                if trunc:
                    os.truncate(self.store.path_of(ino), 0)
            elif exists:  # base-backed
                src = self._base_path(res[1])
                if os.path.isdir(src):
                    raise IsADir(path)
                if trunc:
                    # truncating writes skip the copy; keep the base file's mode
                    base_mode = stat_mod.S_IMODE(os.stat(src).st_mode)
                    ino = self.store.allocate("regular", base_mode)
                else:
                    ino = self.store.copy_up(src)
                self._record(("S", "/".join(parts), ino))
            else:
                self._assert_parent_dir(parts)
                ino = self.store.allocate("regular", mode)
                self._record(("S", "/".join(parts), ino))
            fd = os.open(self.store.path_of(ino), os.O_RDWR)
        return OpenHandle(path, fd, True, "staged", ino)

    def read(self, handle, size, offset):
        return os.pread(handle.fd, size, offset)

    def write(self, handle, data, offset):
        if not handle.writable:
            raise PermissionDenied(f"handle for {handle.path!r} is read-only")
        return os.pwrite(handle.fd, data, offset)

    def fsync(self, handle):
        if handle.writable:
            os.fsync(handle.fd)

    def release(self, handle):
        try:
            os.close(handle.fd)
        except OSError:
            pass

    def truncate(self, path, size, process="?"):
        """SETATTR(size) without a write handle: same staging as a write-open."""
        parts = self._parts(path)
        if self._resolve_existing(parts) is None:
            raise NotFound(path)
        self._require(parts, perm.WRITE, process)
        with self._lock:
            res = self._resolve_existing(parts)
            if res is None:
                raise NotFound(path)
            if res[0] == "staged":
                ino = self.store.ensure_current(res[1], res[2], self.gen.value)
                if ino != res[1]:
                    self._record(("S", "/".join(parts), ino))
            else:
                src = self._base_path(res[1])
                if os.path.isdir(src):
                    raise IsADir(path)
                base_mode = stat_mod.S_IMODE(os.stat(src).st_mode)
                if size == 0:
                    ino = self.store.allocate("regular", base_mode)
                else:
                    ino = self.store.copy_up(src)
                self._record(("S", "/".join(parts), ino))
            os.truncate(self.store.path_of(ino), size)

    def utimens(self, path, times=None, process="?"):
        parts = self._parts(path)
        res = self._resolve_existing(parts)
        if res is None:
            raise NotFound(path)
        if res[0] == "staged":
            os.utime(self.store.path_of(res[1]), times)
        # base-backed: timestamps are not staged; refresh happens on copy-up

    def chmod(self, path, mode):
        raise NotSupported("mode changes are not staged")

    def chown(self, path, uid, gid):
        raise NotSupported("ownership changes are not staged")

    # ------------------------------------------------------------------
    # namespace mutations

    def create_dir(self, path, mode=0o755, process="?"):
        parts = self._parts(path)
        if not parts:
            raise AlreadyExists(path)
        if self._resolve_existing(parts) is not None:
            raise AlreadyExists(path)
        self._require(parts, perm.MUTATE, process)
        with self._lock:
            if self._resolve_existing(parts) is not None:
                raise AlreadyExists(path)
            self._assert_parent_dir(parts)
            ino = self.store.allocate("directory", mode)
            self._record(("S", "/".join(parts), ino))

    def remove(self, path, is_dir, process="?"):
        parts = self._parts(path)
        if not parts:
            raise PermissionDenied("cannot remove the mount root")
        if self._resolve_existing(parts) is None:
            raise NotFound(path)
        self._require(parts, perm.MUTATE, process)
        with self._lock:
            res = self._resolve_existing(parts)
            if res is None:
                raise NotFound(path)
            backing_is_dir = os.path.isdir(self._backing_path(res))
            if is_dir and not backing_is_dir:
                raise NotADir(path)
            if not is_dir and backing_is_dir:
                raise IsADir(path)
            if is_dir and self._merged_listing(parts):
                raise NotEmpty(path)
            self._record(("D", "/".join(parts)))

    def rename(self, src, dst, process="?"):
        src_parts = self._parts(src)
        dst_parts = self._parts(dst)
        if not src_parts or not dst_parts:
            raise PermissionDenied("cannot rename the mount root")
        if src_parts == dst_parts:
            if self._resolve_existing(src_parts) is None:
                raise NotFound(src)
            return
        if dst_parts[: len(src_parts)] == src_parts:
            raise InvalidPath(f"destination inside source: {src} -> {dst}")
        if src_parts[: len(dst_parts)] == dst_parts:
            raise InvalidPath(f"source inside destination: {src} -> {dst}")
        # rename mutates both directories and both names; check all four
        checked = set()
        for target in (src_parts, dst_parts, src_parts[:-1], dst_parts[:-1]):
            if target and target not in checked:
                checked.add(target)
                self._require(target, perm.MUTATE, process)
        with self._lock:
            res_src = self._resolve_existing(src_parts)
            if res_src is None:
                raise NotFound(src)
            self._assert_parent_dir(dst_parts)
            res_dst = self._resolve_existing(dst_parts)
            if res_dst is not None:
                # only file-over-file renames replace their destination
                src_is_dir = os.path.isdir(self._backing_path(res_src))
                dst_is_dir = os.path.isdir(self._backing_path(res_dst))
                if src_is_dir or dst_is_dir:
                    raise AlreadyExists(dst)
            self._record(("R", "/".join(src_parts), "/".join(dst_parts)))

    def _assert_parent_dir(self, parts):
        parent = parts[:-1]
        if not parent:
            return
        res = self._resolve_existing(parent)
        if res is None:
            raise NotFound("/".join(parent))
        if not os.path.isdir(self._backing_path(res)):
            raise NotADir("/".join(parent))

    def _record(self, record):
        """Apply an action to the tree and durably journal it, in lock step."""
        self.tree.apply(record, self.gen.value)
        self.journal.append_action(record)
        if self.on_record is not None:
            self.on_record(record)

    # ------------------------------------------------------------------
    # session lifecycle

    def snapshot(self, name):
        with self._lock:
            return self.journal.append_marker("P", name)

    def travel(self, target, label=None):
        """Jump to the state marker `target` snapshotted at its appendment.

        The travel's own marker preserves the pre-travel state, so the jump
        is reversible.  The destination tree is reconstructed and validated
        before anything is appended; a reconstruction failure leaves the
        session untouched.
        """
        with self._lock:
            if not isinstance(target, int) or not (0 <= target <= self.gen.value):
                raise SessionError(f"invalid travel target {target!r}")
            label = label or f"to-{target}"
            trial = self.journal.records() + [("T", label, target)]
            new_tree = journal_mod.reconstruct(trial, None)
            new_gen = self.journal.append_marker("T", label, target)
            self.tree = new_tree
            return new_gen

    def markers(self):
        _, markers = journal_mod.split_segments(self.journal.records())
        return markers

    def resolve_marker(self, name):
        """Latest marker bearing `name`; returns its generation."""
        found = None
        for marker in self.markers():
            if marker.label == name:
                found = marker.gen
        if found is None:
            raise SessionError(f"no snapshot or travel named {name!r}")
        return found

    def session_diff(self):
        with self._lock:
            return self.tree.diff(
                lambda rel: os.path.lexists(self._base_path(rel))
            )

    def log_view(self):
        """Journal records plus marker/liveness annotation for audit UIs."""
        with self._lock:
            records = self.journal.records()
        segments, markers = journal_mod.split_segments(records)
        live = set(journal_mod.liveness(records, None))
        return {
            "generation": self.gen.value,
            "records": [list(r) for r in records],
            "markers": [
                {
                    "gen": m.gen,
                    "tag": m.tag,
                    "label": m.label,
                    "target": m.target,
                }
                for m in markers
            ],
            "segments": [
                {"gen": g, "records": len(seg), "live": g in live}
                for g, seg in enumerate(segments)
            ],
        }

    def commit(self):
        """Replay live records onto the base; afterwards the base equals the
        pre-commit mounted view and the session starts over."""
        with self._lock:
            if self.broker.pending():
                raise SessionError("pending asks; decide them before commit")
            records = self.journal.records()
            segments, _ = journal_mod.split_segments(records)
            live = journal_mod.liveness(records, None)
            summary = CommitSummary()
            replay = [rec for g in live for rec in segments[g]]
            for idx, rec in enumerate(replay):
                try:
                    self._commit_one(rec, summary)
                except OSError as e:
                    raise SessionError(
                        f"commit stopped at record {idx} ({rec!r}): {e}; "
                        f"{summary.applied} records already applied"
                    ) from e
                summary.applied += 1
            self.tree = OverrideTree()
            self.journal.reset()
            self.store.reset()
            self.gen.value = 0
            return summary

    def _commit_one(self, rec, summary):
        tag = rec[0]
        if tag == "S":
            dst = self._base_path(rec[1])
            src = self.store.path_of(rec[2])
            if os.path.isdir(src):
                os.mkdir(dst)
                shutil.copymode(src, dst)
            else:
                summary.bytes_moved += os.lstat(src).st_size
                summary.moved_files += 1
                os.replace(src, dst)
        elif tag == "R":
            os.rename(self._base_path(rec[1]), self._base_path(rec[2]))
        else:  # D
            target = self._base_path(rec[1])
            if os.path.isdir(target) and not os.path.islink(target):
                shutil.rmtree(target)
            else:
                try:
                    os.unlink(target)
                except FileNotFoundError:
                    pass  # deletion of a never-committed staged path

    def abort(self):
        """Discard all staged state; the base is untouched by construction."""
        with self._lock:
            self.tree = OverrideTree()
            self.journal.reset()
            self.store.reset()
            self.gen.value = 0

    def close(self):
        self.journal.close()
