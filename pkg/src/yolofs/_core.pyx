# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot kernels: path normalization, override-tree resolution,
effective-permission walks, journal line coding.

Behaviorally identical to yolofs._pure (the import-time fallback); the
parity test suite drives both over the same inputs.  Keep the two files in
lock step.
"""

IMPL = "compiled"

_ABSENT_TOMB = ("absent", "tombstoned")
_ABSENT_MISS = ("absent", "staged-dir-miss")


def norm_parts(path):
    if isinstance(path, tuple):
        return path
    if path == "" or path == "/" or path == ".":
        return ()
    cdef list out = []
    for comp in (<str>path).split("/"):
        if comp == "" or comp == ".":
            continue
        if comp == "..":
            raise ValueError(f"path escapes the mount root: {path!r}")
        out.append(comp)
    return tuple(out)


def join_parts(parts):
    return "/".join(parts)


def resolve(root, parts):
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n = len(parts)
    cdef bint staged_ctx = False
    node = root
    base_ctx = ()
    while i < n:
        comp = parts[i]
        node = node.children.get(comp) if node is not None else None
        if node is None:
            if staged_ctx:
                return _ABSENT_MISS
            return ("base", "/".join(base_ctx + tuple(parts[i:])))
        st = node.state
        if st is not None:
            tag = st[0]
            if tag == "T":
                return _ABSENT_TOMB
            if tag == "S":
                staged_ctx = True
            else:
                staged_ctx = False
                base_ctx = tuple((<str>st[1]).split("/")) if st[1] else ()
        elif not staged_ctx:
            base_ctx = base_ctx + (comp,)
        i += 1
    if node is root:
        return ("base", "")
    st = node.state
    if st is None:
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
    cdef Py_ssize_t n = len(parts)
    if n == 0:
        return ""
    cdef bint staged_ctx = False
    node = root
    base_ctx = ()
    for comp in parts[: n - 1]:
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
                base_ctx = tuple((<str>st[1]).split("/")) if st[1] else ()
        elif not staged_ctx:
            base_ctx = base_ctx + (comp,)
    if staged_ctx:
        return None
    return "/".join(base_ctx + (parts[n - 1],))


def rule_effective(rule_root, parts):
    state = rule_root.get("state")
    if state == "hidden":
        return "hidden"
    node = rule_root
    for comp in parts:
        node = (<dict>node["kids"]).get(comp)
        if node is None:
            break
        st = node["state"]
        if st is not None:
            if st == "hidden":
                return "hidden"
            state = st
    return state


cdef frozenset _NEEDS_ESCAPE = frozenset(list(range(0x20)) + [0x25])
cdef dict _ESC = {b: ("%%%02X" % b).encode("ascii") for b in _NEEDS_ESCAPE}


def escape_field(text):
    raw = (<str>text).encode("utf-8")
    cdef bint dirty = False
    for b in raw:
        if b in _NEEDS_ESCAPE:
            dirty = True
            break
    if not dirty:
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
    raw = (<str>text).encode("utf-8")
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n = len(raw)
    out = bytearray()
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
    fields = (<str>line).split("\t")
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
    if not (<str>text).isdigit():
        raise ValueError(f"non-numeric {what}: {text!r}")
    return int(text)
