"""Selects the hot-kernel implementation: compiled extension or pure Python.

The compiled core (`yolofs._core`, built from _core.pyx) is preferred when it
imported cleanly; `YOLOFS_PURE=1` forces the pure fallback.  Both expose the
same functions over the same data shapes — see `yolofs._pure` for the contract.
"""

from __future__ import annotations

import os

if os.environ.get("YOLOFS_PURE"):
    from yolofs import _pure as _impl
else:
    try:
        from yolofs import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        from yolofs import _pure as _impl  # type: ignore[no-redef]

IMPL = _impl.IMPL

norm_parts = _impl.norm_parts
join_parts = _impl.join_parts
resolve = _impl.resolve
base_context_of = _impl.base_context_of
rule_effective = _impl.rule_effective
escape_field = _impl.escape_field
unescape_field = _impl.unescape_field
encode_record = _impl.encode_record
decode_line = _impl.decode_line
