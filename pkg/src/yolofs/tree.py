"""In-memory override tree: where every logical path resolves.

Each node carries an optional state:

- ("S", ino, gen)  staged content in the flat file store
- ("B", src)       redirect to a base-relative path (zero-copy rename)
- ("T",)           tombstone, the path and everything under it is deleted

A path with no node is implicitly a redirect to itself in the base.  Interior
nodes may be state-less; they exist only to reach deeper overrides.

Mutations mirror the journal's action records: stage, delete, rename.  The
enclosing session serializes mutations; readers may run concurrently with
each other.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from yolofs import core
from yolofs.errors import InvalidPath, InvalidRecord, MalformedTree

STAGED = "S"
BASE = "B"
TOMB = "T"

_MAGIC = b"YOVT1"


class Node:
    __slots__ = ("name", "state", "children")

    def __init__(self, name, state=None, children=None):
        self.name = name
        self.state = state
        self.children = children if children is not None else {}

    def __repr__(self):
        return f"Node({self.name!r}, {self.state!r}, {sorted(self.children)})"


@dataclass(frozen=True)
class ChangeEntry:
    """One staged difference against the base tree."""

    path: str
    kind: str  # created | modified | deleted | renamed
    src: str | None = None  # base-relative origin, renamed entries only
    ino: int | None = None  # store index, staged entries only

    def as_dict(self):
        d = {"path": self.path, "kind": self.kind}
        if self.src is not None:
            d["src"] = self.src
        if self.ino is not None:
            d["ino"] = self.ino
        return d


class OverrideTree:
    """Mutable override tree over a base directory."""

    def __init__(self):
        self.root = Node("")

    # -- lookup side ---------------------------------------------------

    def resolve(self, path):
        """Resolve a logical path.

        Returns ("staged", ino, gen) | ("base", src) | ("absent", reason).
        """
        parts = self._parts(path)
        return core.resolve(self.root, parts)

    def merge_readdir(self, path, base_entries):
        """Merged listing of a directory: override children then base names.

        `base_entries` are the names present in the resolved base directory
        (ignored entirely under a staged-directory context).  Tombstoned
        names hide their base counterparts.  Each group is emitted in
        lexicographic order.
        """
        parts = self._parts(path)
        node = self._find(parts)
        out = []
        emitted = set()
        tombstoned = set()
        if node is not None:
            for name in sorted(node.children):
                child = node.children[name]
                if child.state is not None and child.state[0] == TOMB:
                    tombstoned.add(name)
                    continue
                out.append((name, "override"))
                emitted.add(name)
        res = core.resolve(self.root, parts)
        if res[0] == "base":
            for name in sorted(base_entries):
                if name not in emitted and name not in tombstoned:
                    out.append((name, "base"))
        return out

    # -- mutation side ---------------------------------------------------

    def apply(self, record, current_gen):
        """Apply one action record (S/R/D tuple) at the given generation."""
        tag = record[0]
        if tag == STAGED:
            parts = self._parts(record[1])
            if not parts:
                raise InvalidRecord("cannot stage the mount root")
            node = self._ensure(parts)
            node.state = (STAGED, record[2], current_gen)
            node.children = {}
        elif tag == "D":
            parts = self._parts(record[1])
            if not parts:
                raise InvalidRecord("cannot delete the mount root")
            node = self._ensure(parts)
            node.state = (TOMB,)
            node.children = {}
        elif tag == "R":
            self._apply_rename(record[1], record[2], current_gen)
        else:
            raise InvalidRecord(f"not an action record: {tag!r}")

    def _apply_rename(self, src, dst, current_gen):
        src_parts = self._parts(src)
        dst_parts = self._parts(dst)
        if not src_parts or not dst_parts:
            raise InvalidRecord("cannot rename the mount root")
        if src_parts == dst_parts or dst_parts[: len(src_parts)] == src_parts:
            raise InvalidRecord(f"rename destination inside source: {src} -> {dst}")
        if src_parts[: len(dst_parts)] == dst_parts:
            raise InvalidRecord(f"rename source inside destination: {src} -> {dst}")
        res = core.resolve(self.root, src_parts)
        if res[0] == "absent":
            raise InvalidRecord(f"rename source resolves to nothing: {src}")
        src_node = self._find(src_parts)
        if src_node is not None and src_node.state is not None:
            moved_state = src_node.state
        else:
            # implicit or structure-only source: pin its resolved base origin
            moved_state = (BASE, res[1])
        moved_children = src_node.children if src_node is not None else {}
        dst_node = self._ensure(dst_parts)
        dst_node.state = moved_state
        dst_node.children = moved_children
        src_node = self._ensure(src_parts)
        src_node.state = (TOMB,)
        src_node.children = {}

    # -- diff ---------------------------------------------------

    def diff(self, base_prober):
        """Classify every override against the base.

        `base_prober(base_relative_path) -> bool` answers whether the base
        has an entry there.  Returns mutations sorted by path with deletions
        last in reverse path order, so the list is apply-safe (parents before
        children for creations, children before parents for deletions).
        """
        changes = []
        deletions = []
        self._diff_walk(self.root, (), ("base", ()), base_prober, changes, deletions)
        changes.sort(key=lambda e: e.path)
        deletions.sort(key=lambda e: e.path, reverse=True)
        return changes + deletions

    def _diff_walk(self, node, parts, ctx, prober, changes, deletions):
        # ctx: ("base", base_parts_tuple) or ("staged",) for the parent chain
        for name in sorted(node.children):
            child = node.children[name]
            cparts = parts + (name,)
            path = "/".join(cparts)
            st = child.state
            if ctx[0] == "base":
                counterpart = "/".join(ctx[1] + (name,))
            else:
                counterpart = None
            if st is None:
                child_ctx = ctx if ctx[0] == "staged" else ("base", ctx[1] + (name,))
            elif st[0] == STAGED:
                if counterpart is not None and prober(counterpart):
                    changes.append(ChangeEntry(path, "modified", ino=st[1]))
                else:
                    changes.append(ChangeEntry(path, "created", ino=st[1]))
                child_ctx = ("staged",)
            elif st[0] == BASE:
                if st[1] != path:
                    changes.append(ChangeEntry(path, "renamed", src=st[1]))
                child_ctx = ("base", tuple(st[1].split("/")) if st[1] else ())
            else:  # tombstone
                if counterpart is not None and prober(counterpart):
                    deletions.append(ChangeEntry(path, "deleted"))
                continue
            self._diff_walk(child, cparts, child_ctx, prober, changes, deletions)

    # -- serialization ---------------------------------------------------

    def serialize(self):
        """Canonical byte form: magic, then pre-order nodes (children by name)."""
        out = [_MAGIC]
        for name in sorted(self.root.children):
            self._ser_node(self.root.children[name], out)
        return b"".join(out)

    def _ser_node(self, node, out):
        raw = node.name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        st = node.state
        if st is None:
            out.append(b"\x00")
        elif st[0] == STAGED:
            out.append(b"\x01" + struct.pack("<QQ", st[1], st[2]))
        elif st[0] == BASE:
            raw_src = st[1].encode("utf-8")
            out.append(b"\x02" + struct.pack("<I", len(raw_src)) + raw_src)
        else:
            out.append(b"\x03")
        out.append(struct.pack("<I", len(node.children)))
        for name in sorted(node.children):
            self._ser_node(node.children[name], out)

    @classmethod
    def deserialize(cls, data):
        if not data.startswith(_MAGIC):
            raise MalformedTree("bad magic")
        tree = cls()
        pos = len(_MAGIC)
        end = len(data)

        def take(n):
            nonlocal pos
            if pos + n > end:
                raise MalformedTree("truncated payload")
            chunk = data[pos : pos + n]
            pos += n
            return chunk

        def read_node():
            (name_len,) = struct.unpack("<I", take(4))
            if name_len > end - pos:
                raise MalformedTree("truncated name")
            name = take(name_len).decode("utf-8", errors="strict")
            if not name or "/" in name or name in (".", ".."):
                raise MalformedTree(f"illegal node name {name!r}")
            tag = take(1)[0]
            if tag == 0:
                state = None
            elif tag == 1:
                ino, gen = struct.unpack("<QQ", take(16))
                if ino < 1:
                    raise MalformedTree("staged ino must be >= 1")
                state = (STAGED, ino, gen)
            elif tag == 2:
                (src_len,) = struct.unpack("<I", take(4))
                src = take(src_len).decode("utf-8", errors="strict")
                state = (BASE, src)
            elif tag == 3:
                state = (TOMB,)
            else:
                raise MalformedTree(f"unknown state tag {tag}")
            (n_children,) = struct.unpack("<I", take(4))
            if state is not None and state[0] == TOMB and n_children:
                raise MalformedTree("tombstone with children")
            node = Node(name, state)
            for _ in range(n_children):
                child = read_node()
                if child.name in node.children:
                    raise MalformedTree(f"duplicate child {child.name!r}")
                node.children[child.name] = child
            return node

        while pos < end:
            child = read_node()
            if child.name in tree.root.children:
                raise MalformedTree(f"duplicate child {child.name!r}")
            tree.root.children[child.name] = child
        return tree

    # -- helpers ---------------------------------------------------

    def equals(self, other):
        return self.serialize() == other.serialize()

    def base_context_of(self, path):
        return core.base_context_of(self.root, self._parts(path))

    @staticmethod
    def _parts(path):
        try:
            return core.norm_parts(path)
        except ValueError as e:
            raise InvalidPath(str(e)) from None

    def _find(self, parts):
        node = self.root
        for comp in parts:
            node = node.children.get(comp)
            if node is None:
                return None
        return node

    def _ensure(self, parts):
        node = self.root
        for comp in parts[:-1]:
            child = node.children.get(comp)
            if child is None:
                child = Node(comp)
                node.children[comp] = child
            elif child.state is not None and child.state[0] == TOMB:
                raise InvalidRecord(
                    f"record path crosses tombstoned ancestor {child.name!r}"
                )
            node = child
        child = node.children.get(parts[-1])
        if child is None:
            child = Node(parts[-1])
            node.children[parts[-1]] = child
        return child
