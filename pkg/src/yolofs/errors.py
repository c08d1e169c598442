"""Exception types shared across the filesystem layers.

Every error that can surface through the mount carries a POSIX errno so the
bridge can translate it without a lookup table at each call site.
"""

from __future__ import annotations

import errno


class YoloError(Exception):
    """Base error; `eno` is the errno delivered to the kernel."""

    eno = errno.EIO

    def __init__(self, msg: str = ""):
        super().__init__(msg or self.__class__.__name__)


class InvalidPath(YoloError):
    eno = errno.EINVAL


class NotFound(YoloError):
    eno = errno.ENOENT


class AlreadyExists(YoloError):
    eno = errno.EEXIST


class NotADir(YoloError):
    eno = errno.ENOTDIR


class IsADir(YoloError):
    eno = errno.EISDIR


class NotEmpty(YoloError):
    eno = errno.ENOTEMPTY


class PermissionDenied(YoloError):
    eno = errno.EACCES


class NotSupported(YoloError):
    eno = errno.ENOTSUP


class StoreError(YoloError):
    """File store allocation / copy-up / CoW failure."""


class CorruptJournal(YoloError):
    """Journal bytes that cannot be decoded into records.

    `line` is the 1-based line number of the offending record when known.
    """

    def __init__(self, msg: str = "", line: int | None = None):
        self.line = line
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


class InvalidRecord(YoloError):
    """A structurally valid record that cannot be applied to the tree."""


class MalformedTree(YoloError):
    """Serialized override tree that fails validation."""


class SessionError(YoloError):
    """Control-plane failure (bad verb, bad target, busy session)."""
