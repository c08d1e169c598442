"""Naive materialized-tree oracle.

Keeps a full copy of the logical view in plain dicts and implements every
operation literally (rename copies the whole subtree mapping, snapshots
deep-copy the entire state).  Deliberately shares no code with the override
tree, journal, or store: it is the independent reference the staging stack
is measured against.
"""

from __future__ import annotations

import copy
import os


class OracleError(Exception):
    pass


class NaiveFs:
    def __init__(self):
        self.dirs = {""}  # logical dir paths, "" is the root
        self.files = {}  # logical file path -> bytes
        self.marker_states = {0: ({""}, {})}  # gen -> (dirs, files) at arrival
        self.gen = 0

    @classmethod
    def from_base(cls, base_dir):
        fs = cls()
        base_dir = os.fspath(base_dir)
        for dirpath, dirnames, filenames in os.walk(base_dir):
            dirnames[:] = [d for d in dirnames if d != ".yolo"]
            rel = os.path.relpath(dirpath, base_dir)
            rel = "" if rel == "." else rel
            if rel:
                fs.dirs.add(rel)
            for name in filenames:
                with open(os.path.join(dirpath, name), "rb") as f:
                    fs.files[_join(rel, name)] = f.read()
        fs.marker_states = {0: fs._copy_state()}
        return fs

    # ------------------------------------------------------------------

    def _copy_state(self):
        return set(self.dirs), dict(self.files)

    def exists(self, p):
        return p in self.dirs or p in self.files

    def _need_parent(self, p):
        parent = _parent(p)
        if parent not in self.dirs:
            raise OracleError(f"parent of {p!r} is not a directory")

    def _children(self, p):
        prefix = p + "/" if p else ""
        names = set()
        for q in list(self.dirs) + list(self.files):
            if q and q.startswith(prefix) and q != p:
                rest = q[len(prefix):]
                names.add(rest.split("/", 1)[0])
        return sorted(names)

    # ------------------------------------------------------------------
    # operations (mirror the mount's semantics)

    def write_trunc(self, p, data):
        if p in self.dirs:
            raise OracleError(f"{p!r} is a directory")
        self._need_parent(p)
        self.files[p] = data

    def append(self, p, data):
        if p in self.dirs:
            raise OracleError(f"{p!r} is a directory")
        self._need_parent(p)
        self.files[p] = self.files.get(p, b"") + data

    def create(self, p):
        if p in self.dirs:
            raise OracleError(f"{p!r} is a directory")
        self._need_parent(p)
        if p not in self.files:
            self.files[p] = b""

    def read(self, p):
        if p not in self.files:
            raise OracleError(f"{p!r} is not a file")
        return self.files[p]

    def mkdir(self, p):
        if self.exists(p):
            raise OracleError(f"{p!r} exists")
        self._need_parent(p)
        self.dirs.add(p)

    def unlink(self, p):
        if p in self.dirs:
            raise OracleError(f"{p!r} is a directory")
        if p not in self.files:
            raise OracleError(f"{p!r} does not exist")
        del self.files[p]

    def rmdir(self, p):
        if not p:
            raise OracleError("cannot remove the root")
        if p in self.files:
            raise OracleError(f"{p!r} is a file")
        if p not in self.dirs:
            raise OracleError(f"{p!r} does not exist")
        if self._children(p):
            raise OracleError(f"{p!r} is not empty")
        self.dirs.remove(p)

    def rename(self, src, dst):
        if not src or not dst:
            raise OracleError("cannot rename the root")
        if not self.exists(src):
            raise OracleError(f"{src!r} does not exist")
        if src == dst:
            return
        if dst.startswith(src + "/") or src.startswith(dst + "/"):
            raise OracleError("nested rename")
        self._need_parent(dst)
        if self.exists(dst):
            if src in self.files and dst in self.files:
                pass  # file over file replaces
            else:
                raise OracleError(f"{dst!r} exists")
        if src in self.files:
            self.files[dst] = self.files.pop(src)
            return
        # directory: move every path under the prefix
        self.dirs.remove(src)
        self.dirs.add(dst)
        prefix = src + "/"
        for q in [q for q in self.dirs if q.startswith(prefix)]:
            self.dirs.remove(q)
            self.dirs.add(dst + "/" + q[len(prefix):])
        for q in [q for q in self.files if q.startswith(prefix)]:
            self.files[dst + "/" + q[len(prefix):]] = self.files.pop(q)

    def readdir(self, p):
        if p in self.files or p not in self.dirs:
            raise OracleError(f"{p!r} is not a directory")
        return self._children(p)

    # ------------------------------------------------------------------
    # markers

    def snapshot(self):
        self.gen += 1
        self.marker_states[self.gen] = self._copy_state()
        return self.gen

    def travel(self, target):
        if not (0 <= target <= self.gen):
            raise OracleError(f"bad travel target {target}")
        self.gen += 1
        self.marker_states[self.gen] = self._copy_state()
        self.dirs, self.files = copy.deepcopy(self.marker_states[target])
        return self.gen

    # ------------------------------------------------------------------
    # views

    def view(self):
        """{path: "dir" | bytes} for every logical path."""
        out = {p: "dir" for p in self.dirs if p}
        out.update(self.files)
        return out

    def materialize(self, dst_dir):
        """Write the current view to a real directory (commit reference)."""
        os.makedirs(dst_dir, exist_ok=True)
        for d in sorted(self.dirs):
            if d:
                os.makedirs(os.path.join(dst_dir, d), exist_ok=True)
        for p, data in self.files.items():
            path = os.path.join(dst_dir, p)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "wb") as f:
                f.write(data)


def _parent(p):
    return p.rsplit("/", 1)[0] if "/" in p else ""


def _join(rel, name):
    return f"{rel}/{name}" if rel else name


def disk_view(root):
    """{path: "dir" | bytes} for a real directory tree (excluding .yolo)."""
    out = {}
    root = os.fspath(root)
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = [d for d in dirnames if d != ".yolo"]
        rel = os.path.relpath(dirpath, root)
        rel = "" if rel == "." else rel
        if rel:
            out[rel] = "dir"
        for name in filenames:
            with open(os.path.join(dirpath, name), "rb") as f:
                out[_join(rel, name)] = f.read()
    return out


def mount_view(session):
    """{path: "dir" | bytes} as served by a MountSession's read side."""
    out = {}
    stack = [""]
    while stack:
        cur = stack.pop()
        for name, _origin in session.readdir(cur):
            path = _join(cur, name)
            st, _ = session.getattr(path)
            if (st.st_mode & 0o170000) == 0o040000:
                out[path] = "dir"
                stack.append(path)
            else:
                handle = session.open(path)
                try:
                    out[path] = session.read(handle, st.st_size + 16, 0)
                finally:
                    session.release(handle)
    return out
