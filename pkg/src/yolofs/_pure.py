"""Pure-Python implementations of the per-operation hot kernels.

Everything here sits on the critical path of every interposed filesystem
operation: path normalization, override-tree resolution, effective-permission
walks, and journal line encoding.  `yolofs.core` swaps in the compiled
`yolofs._core` variant when it is importable; the two must stay behaviorally
identical (tests/test_core_parity.py holds them to that).

Data shapes (shared with the compiled core):

- paths are tuples of path components ("parts"), root = ()
- override-tree nodes have .name / .state / .children (dict name -> node)
- node states are tuples: ("S", ino, gen) | ("B", "base/rel/path") | ("T",)
- resolutions are tuples:
    ("staged", ino, gen) | ("base", "base/rel/path") |
    ("absent", "tombstoned" | "staged-dir-miss")
  (a path with no override anywhere resolves to ("base", itself))
- rule trees are nested dicts: {"state": str|None, "kids": {name: node}}
"""

from __future__ import annotations

IMPL = "pure"

_ABSENT_TOMB = ("absent", "tombstoned")
_ABSENT_MISS = ("absent", "staged-dir-miss")


def norm_parts(path):
    """Normalize a logical path to a tuple of components.

    Accepts "a/b", "/a/b", "a//b", "./a", "a/".  Rejects ".." anywhere and
    stray "." components other than a leading "./".  Returns () for the root.
    """
    if isinstance(path, tuple):
        return path
    if path in ("", "/", "."):
        return ()
    out = []
    for comp in path.split("/"):
        if comp == "" or comp == ".":
            continue
        if comp == "..":
            raise ValueError(f"path escapes the mount root: {path!r}")
        out.append(comp)
    return tuple(out)


def join_parts(parts):
    return "/".join(parts)


def resolve(root, parts):
    """Walk the override tree root->leaf and resolve a logical path.

    Context rules: a Tombstone anywhere on the walk hides the whole suffix;
    a staged-directory context never falls back to the base (missing child
    => absent); a BasePath redirect remaps the remaining suffix under its
    source; untouched paths map to themselves in the base.
    """
    node = root
    base_ctx = ()        # accumulated base-relative parts while in base context
    staged_ctx = False   # inside a StagedFile subtree with no deeper redirect
    n = len(parts)
    i = 0
    while i < n:
        comp = parts[i]
        node = node.children.get(comp) if node is not None else None
        if node is None:
            if staged_ctx:
                return _ABSENT_MISS
            return ("base", "/".join(base_ctx + parts[i:]))
        st = node.state
        if st is not None:
            tag = st[0]
            if tag == "T":
                return _ABSENT_TOMB
            if tag == "S":
                staged_ctx = True
            else:  # "B"
                staged_ctx = False
                base_ctx = tuple(st[1].split("/")) if st[1] else ()
        elif not staged_ctx:
            base_ctx = base_ctx + (comp,)
        i += 1
    if node is root:
        return ("base", "")
    st = node.state
    if st is None:
        # structure-only node: resolves through its context
        if staged_ctx:
            return _ABSENT_MISS
        return ("base", "/".join(base_ctx))
    tag = st[0]
    if tag == "S":
        return ("staged", st[1], st[2])
    if tag == "B":
        return ("base", st[1])
    return _ABSENT_TOMB


def base_context_of(root, parts):
    """Base-relative counterpart of `parts` resolved through strict ancestors.

    Ignores any state on the final node itself; used by diff classification
    to ask "does the base have something where this override sits?".
    Returns the base-relative path string, or None when an ancestor is a
    staged directory (no base counterpart exists).
    """
    if not parts:
        return ""
    node = root
    base_ctx = ()
    staged_ctx = False
    for comp in parts[:-1]:
        node = node.children.get(comp) if node is not None else None
        st = node.state if node is not None else None
        if st is not None:
            tag = st[0]
            if tag == "T":
                return None
            if tag == "S":
                staged_ctx = True
            else:
                staged_ctx = False
                base_ctx = tuple(st[1].split("/")) if st[1] else ()
        elif not staged_ctx:
            base_ctx = base_ctx + (comp,)
    if staged_ctx:
        return None
    return "/".join(base_ctx + (parts[-1],))


def rule_effective(rule_root, parts):
    """Effective permission state for a path, or None when no rule governs it.

    Carries the nearest ancestor rule down the walk; a "hidden" rule
    short-circuits so nothing below it can re-expose the subtree.
    """
    state = rule_root.get("state")
    if state == "hidden":
        return "hidden"
    node = rule_root
    for comp in parts:
        node = node["kids"].get(comp)
        if node is None:
            break
        st = node["state"]
        if st is not None:
            if st == "hidden":
                return "hidden"
            state = st
    return state


# Journal wire format: UTF-8 text, one record per line, TAB-separated
# fields, LF-terminated.  Bytes 0x00-0x1F and '%' in paths/labels are
# percent-encoded as %XX (uppercase hex).

_NEEDS_ESCAPE = frozenset(range(0x20)) | {0x25}
_ESC = {b: f"%{b:02X}".encode("ascii") for b in _NEEDS_ESCAPE}


def escape_field(text):
    raw = text.encode("utf-8")
    if not any(b in _NEEDS_ESCAPE for b in raw):
        return text
    out = bytearray()
    for b in raw:
        if b in _NEEDS_ESCAPE:
            out += _ESC[b]
        else:
            out.append(b)
    return out.decode("utf-8")


def unescape_field(text):
    if "%" not in text:
        return text
    out = bytearray()
    raw = text.encode("utf-8")
    i = 0
    n = len(raw)
    while i < n:
        b = raw[i]
        if b == 0x25:
            if i + 2 >= n:
                raise ValueError("truncated %XX escape")
            try:
                out.append(int(raw[i + 1 : i + 3], 16))
            except ValueError:
                raise ValueError("bad %XX escape") from None
            i += 3
        else:
            out.append(b)
            i += 1
    return out.decode("utf-8")


def encode_record(rec):
    """Encode one journal record tuple as its line (bytes, LF included)."""
    tag = rec[0]
    if tag == "S":
        line = f"S\t{escape_field(rec[1])}\t{rec[2]}\n"
    elif tag == "R":
        line = f"R\t{escape_field(rec[1])}\t{escape_field(rec[2])}\n"
    elif tag == "D":
        line = f"D\t{escape_field(rec[1])}\n"
    elif tag == "P":
        line = f"P\t{escape_field(rec[1])}\n"
    elif tag == "T":
        line = f"T\t{escape_field(rec[1])}\t{rec[2]}\n"
    else:
        raise ValueError(f"unknown record tag {tag!r}")
    return line.encode("utf-8")


def decode_line(line):
    """Decode one complete journal line (str, no trailing LF) to a record tuple.

    Raises ValueError on any structural problem; the caller wraps it with the
    line number.
    """
    fields = line.split("\t")
    tag = fields[0]
    if tag == "S":
        if len(fields) != 3:
            raise ValueError("S record needs path and ino")
        ino = _decimal(fields[2], "ino")
        if ino < 1:
            raise ValueError("ino must be >= 1")
        return ("S", unescape_field(fields[1]), ino)
    if tag == "R":
        if len(fields) != 3:
            raise ValueError("R record needs src and dst")
        return ("R", unescape_field(fields[1]), unescape_field(fields[2]))
    if tag == "D":
        if len(fields) != 2:
            raise ValueError("D record needs a path")
        return ("D", unescape_field(fields[1]))
    if tag == "P":
        if len(fields) != 2:
            raise ValueError("P record needs a label")
        label = unescape_field(fields[1])
        if not label:
            raise ValueError("empty snapshot label")
        return ("P", label)
    if tag == "T":
        if len(fields) != 3:
            raise ValueError("T record needs a label and target generation")
        label = unescape_field(fields[1])
        if not label:
            raise ValueError("empty travel label")
        target = _decimal(fields[2], "generation")
        return ("T", label, target)
    raise ValueError(f"unknown record tag {tag!r}")


def _decimal(text, what):
    if not text.isdigit():
        raise ValueError(f"non-numeric {what}: {text!r}")
    return int(text)
