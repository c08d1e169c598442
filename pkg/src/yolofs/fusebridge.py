"""Raw FUSE bridge: serves the kernel's userspace-filesystem protocol.

This environment ships no libfuse, so the bridge speaks the FUSE wire
protocol directly over /dev/fuse (request/reply structs, INIT negotiation,
nodeid bookkeeping) and mounts with the raw mount(2) syscall.  Two operation
backends plug into the same bridge:

- `SessionOps`   routes every operation through a MountSession (staging,
  journal, permissions) — the real filesystem.
- `PassthroughOps` forwards directly to a plain directory — the null
  pass-through control mount used as the performance baseline.

Entry and attribute caching are disabled (validity 0): travel swaps the
override tree underneath the kernel, so the kernel must re-ask rather than
serve stale dentries.  File pages stay cacheable; the default open behavior
(no FOPEN_KEEP_CACHE) drops cached pages on each open, which bounds staleness
to one open/close cycle.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import errno
import logging
import os
import stat as stat_mod
import struct
import threading
from concurrent.futures import ThreadPoolExecutor

from yolofs.errors import NotSupported, YoloError

logger = logging.getLogger(__name__)

_libc = ctypes.CDLL(None, use_errno=True)

# opcodes
LOOKUP = 1
FORGET = 2
GETATTR = 3
SETATTR = 4
READLINK = 5
SYMLINK = 6
MKNOD = 8
MKDIR = 9
UNLINK = 10
RMDIR = 11
RENAME = 12
LINK = 13
OPEN = 14
READ = 15
WRITE = 16
STATFS = 17
RELEASE = 18
FSYNC = 20
SETXATTR = 21
GETXATTR = 22
LISTXATTR = 23
REMOVEXATTR = 24
FLUSH = 25
INIT = 26
OPENDIR = 27
READDIR = 28
RELEASEDIR = 29
FSYNCDIR = 30
ACCESS = 34
CREATE = 35
INTERRUPT = 36
DESTROY = 38
BATCH_FORGET = 42
RENAME2 = 45

_IN_HEADER = struct.Struct("<IIQQIIII")
_OUT_HEADER = struct.Struct("<IiQ")
# ino, size, blocks, atime, mtime, ctime, a/m/c nsec, mode, nlink, uid, gid,
# rdev, blksize, padding
_ATTR = struct.Struct("<" + "Q" * 6 + "I" * 10)
_ENTRY_HEAD = struct.Struct("<QQQQII")
_ATTR_HEAD = struct.Struct("<QII")
_OPEN_OUT = struct.Struct("<QII")
_WRITE_OUT = struct.Struct("<II")
_INIT_OUT = struct.Struct("<IIIIHHIIHH8I")
_STATFS_OUT = struct.Struct("<QQQQQIIII6I")
_SETATTR_IN = struct.Struct("<IIQQQQQQIIIIIIII")
_READ_IN = struct.Struct("<QQIIQII")
_WRITE_IN = struct.Struct("<QQIIQII")

FATTR_MODE = 1 << 0
FATTR_UID = 1 << 1
FATTR_GID = 1 << 2
FATTR_SIZE = 1 << 3
FATTR_ATIME = 1 << 4
FATTR_MTIME = 1 << 5
FATTR_FH = 1 << 6
FATTR_ATIME_NOW = 1 << 7
FATTR_MTIME_NOW = 1 << 8

FUSE_GETATTR_FH = 1 << 0
FUSE_MAX_PAGES = 1 << 22

_MAX_WRITE = 1 << 20
_READ_BUF = _MAX_WRITE + (1 << 16)

MNT_DETACH = 2


def _dirents_padded():
    """Whether readdir entries must be 8-byte aligned.

    Mainline Linux requires each fuse_dirent padded to 8 bytes; gVisor's
    sentry walks the stream unpadded (header + namelen exactly) and a padded
    multi-entry batch desyncs its parser.  gVisor advertises itself through
    its fixed uname.  YOLOFS_DIRENT_PADDING=aligned|packed overrides.
    """
    forced = os.environ.get("YOLOFS_DIRENT_PADDING")
    if forced == "aligned":
        return True
    if forced == "packed":
        return False
    return not os.uname().release.startswith("4.4.0")


def _mount_fuse(mountpoint):
    fd = os.open("/dev/fuse", os.O_RDWR)
    opts = f"fd={fd},rootmode=40755,user_id=0,group_id=0".encode()
    ret = _libc.mount(b"yolofs", os.fsencode(mountpoint), b"fuse", 0, opts)
    if ret != 0:
        e = ctypes.get_errno()
        os.close(fd)
        raise OSError(e, f"fuse mount at {mountpoint!r} failed: {os.strerror(e)}")
    return fd


def unmount(mountpoint):
    target = os.fsencode(mountpoint)
    if _libc.umount2(target, 0) == 0:
        return
    ret = _libc.umount2(target, MNT_DETACH)
    if ret != 0:
        e = ctypes.get_errno()
        if e not in (errno.EINVAL, errno.ENOENT):  # not mounted is fine
            raise OSError(e, f"umount {mountpoint!r}: {os.strerror(e)}")


def _pack_attr(nodeid, st):
    atime_s, atime_ns = divmod(st.st_atime_ns, 1_000_000_000)
    mtime_s, mtime_ns = divmod(st.st_mtime_ns, 1_000_000_000)
    ctime_s, ctime_ns = divmod(st.st_ctime_ns, 1_000_000_000)
    return _ATTR.pack(
        nodeid,
        st.st_size,
        max((st.st_size + 511) // 512, 0),
        atime_s,
        mtime_s,
        ctime_s,
        atime_ns,
        mtime_ns,
        ctime_ns,
        st.st_mode,
        st.st_nlink,
        st.st_uid,
        st.st_gid,
        getattr(st, "st_rdev", 0),
        4096,
        0,
    )


class _InodeTable:
    """nodeid <-> path bookkeeping; paths recompute through parent links so a
    directory rename moves its whole looked-up subtree in O(1)."""

    ROOT = 1

    def __init__(self):
        self._lock = threading.Lock()
        self._nodes = {1: [0, "", 0]}  # id -> [parent_id, name, nlookup]
        self._by_name = {}  # (parent_id, name) -> id
        self._next = 2

    def parts(self, nodeid):
        with self._lock:
            out = []
            cur = nodeid
            while cur != 1:
                node = self._nodes.get(cur)
                if node is None:
                    raise YoloError(f"stale nodeid {nodeid}")
                out.append(node[1])
                cur = node[0]
            out.reverse()
            return tuple(out)

    def remember(self, parent_id, name):
        with self._lock:
            key = (parent_id, name)
            nid = self._by_name.get(key)
            if nid is None:
                nid = self._next
                self._next += 1
                self._nodes[nid] = [parent_id, name, 1]
                self._by_name[key] = nid
            else:
                self._nodes[nid][2] += 1
            return nid

    def forget(self, nodeid, nlookup):
        with self._lock:
            node = self._nodes.get(nodeid)
            if node is None or nodeid == 1:
                return
            node[2] -= nlookup
            if node[2] <= 0:
                del self._nodes[nodeid]
                key = (node[0], node[1])
                if self._by_name.get(key) == nodeid:
                    del self._by_name[key]

    def detach(self, parent_id, name):
        """Name no longer resolves (unlink/rmdir/rename-over)."""
        with self._lock:
            self._by_name.pop((parent_id, name), None)

    def rename(self, parent_id, name, new_parent, new_name):
        with self._lock:
            nid = self._by_name.pop((parent_id, name), None)
            self._by_name.pop((new_parent, new_name), None)
            if nid is not None:
                node = self._nodes[nid]
                node[0] = new_parent
                node[1] = new_name
                self._by_name[(new_parent, new_name)] = nid


class FuseMount:
    """One mounted bridge instance; reads requests until unmounted."""

    def __init__(self, ops, mountpoint, workers=16):
        self.ops = ops
        self.mountpoint = os.path.abspath(os.fspath(mountpoint))
        self.inodes = _InodeTable()
        self._fd = _mount_fuse(self.mountpoint)
        self._write_lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._handles = {}
        self._dir_handles = {}
        self._next_fh = 1
        self._fh_lock = threading.Lock()
        self._alive = True
        self._stopping = False
        self.proto_minor = 31
        self._pad_dirents = _dirents_padded()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    # ------------------------------------------------------------------

    def _loop(self):
        # the fuse device does not support polling here, so this is a
        # blocking read loop; unmount() breaks it by killing the connection
        try:
            while not self._stopping:
                try:
                    buf = os.read(self._fd, _READ_BUF)
                except OSError as e:
                    if e.errno in (errno.EINTR, errno.EAGAIN):
                        continue
                    break  # ENODEV/EBADF: unmounted or connection closed
                if not buf:
                    break
                (hlen, opcode, unique, nodeid, uid, gid, pid, _pad) = _IN_HEADER.unpack_from(buf, 0)
                body = buf[_IN_HEADER.size : hlen]
                if opcode in (FORGET, BATCH_FORGET):
                    self._handle_forget(opcode, nodeid, body)
                    continue
                if opcode == INTERRUPT:
                    continue
                if opcode == INIT:
                    self._handle_init(unique, body)
                    continue
                self._pool.submit(
                    self._dispatch, opcode, unique, nodeid, (uid, gid, pid), body
                )
        finally:
            self._alive = False
            try:
                os.close(self._fd)
            except OSError:
                pass

    def _reply(self, unique, err=0, payload=b""):
        header = _OUT_HEADER.pack(_OUT_HEADER.size + len(payload), -err, unique)
        with self._write_lock:
            try:
                os.write(self._fd, header + payload)
            except OSError:
                pass  # request aborted or connection gone

    def _handle_init(self, unique, body):
        major, minor, max_readahead, flags = struct.unpack_from("<IIII", body, 0)
        self.proto_minor = min(minor, 31)
        out = _INIT_OUT.pack(
            7,
            self.proto_minor,
            max_readahead,
            flags & FUSE_MAX_PAGES,
            16,
            12,
            _MAX_WRITE,
            1,
            _MAX_WRITE // 4096,
            0,
            *([0] * 8),
        )
        self._reply(unique, 0, out)

    def _handle_forget(self, opcode, nodeid, body):
        if opcode == FORGET:
            (nlookup,) = struct.unpack_from("<Q", body, 0)
            self.inodes.forget(nodeid, nlookup)
        else:
            (count, _dummy) = struct.unpack_from("<II", body, 0)
            off = 8
            for _ in range(count):
                nid, nlookup = struct.unpack_from("<QQ", body, off)
                off += 16
                self.inodes.forget(nid, nlookup)

    # ------------------------------------------------------------------

    def _dispatch(self, opcode, unique, nodeid, ctx, body):
        try:
            handler = _HANDLERS.get(opcode)
            if handler is None:
                self._reply(unique, errno.ENOSYS)
                return
            handler(self, unique, nodeid, ctx, body)
        except YoloError as e:
            self._reply(unique, e.eno)
        except OSError as e:
            self._reply(unique, e.errno or errno.EIO)
        except Exception:
            logger.exception("unhandled error in opcode %d", opcode)
            self._reply(unique, errno.EIO)

    def _entry_reply(self, unique, parent_id, name, st):
        nodeid = self.inodes.remember(parent_id, name)
        payload = _ENTRY_HEAD.pack(nodeid, 0, 0, 0, 0, 0) + _pack_attr(nodeid, st)
        self._reply(unique, 0, payload)

    def _attr_reply(self, unique, nodeid, st):
        payload = _ATTR_HEAD.pack(0, 0, 0) + _pack_attr(nodeid, st)
        self._reply(unique, 0, payload)

    def _new_fh(self, obj, table):
        with self._fh_lock:
            fh = self._next_fh
            self._next_fh += 1
            table[fh] = obj
            return fh

    # --- namespace ops ---

    def _op_lookup(self, unique, nodeid, ctx, body):
        name = body.rstrip(b"\x00").decode("utf-8", "surrogateescape")
        parts = self.inodes.parts(nodeid) + (name,)
        st = self.ops.getattr(parts, None, ctx)
        self._entry_reply(unique, nodeid, name, st)

    def _op_getattr(self, unique, nodeid, ctx, body):
        flags = dummy = fh = 0
        if len(body) >= 16:
            flags, dummy, fh = struct.unpack_from("<IIQ", body, 0)
        handle = self._handles.get(fh) if flags & FUSE_GETATTR_FH else None
        parts = None
        if handle is None:
            parts = self.inodes.parts(nodeid)
        st = self.ops.getattr(parts, handle, ctx)
        self._attr_reply(unique, nodeid, st)

    def _op_setattr(self, unique, nodeid, ctx, body):
        (valid, _pad, fh, size, _lock, atime, mtime, _ctime, atimensec,
         mtimensec, _ctimensec, mode, _u4, uid, gid, _u5) = _SETATTR_IN.unpack_from(body, 0)
        parts = self.inodes.parts(nodeid)
        handle = self._handles.get(fh) if valid & FATTR_FH else None
        fields = {}
        if valid & FATTR_SIZE:
            fields["size"] = size
        if valid & FATTR_MODE:
            fields["mode"] = mode
        if valid & (FATTR_UID | FATTR_GID):
            fields["own"] = (uid if valid & FATTR_UID else -1,
                             gid if valid & FATTR_GID else -1)
        if valid & (FATTR_ATIME | FATTR_MTIME | FATTR_ATIME_NOW | FATTR_MTIME_NOW):
            if valid & (FATTR_ATIME_NOW | FATTR_MTIME_NOW):
                fields["times"] = None
            else:
                fields["times"] = (
                    atime + atimensec / 1e9,
                    mtime + mtimensec / 1e9,
                )
        st = self.ops.setattr(parts, handle, fields, ctx)
        self._attr_reply(unique, nodeid, st)

    def _op_readlink(self, unique, nodeid, ctx, body):
        target = self.ops.readlink(self.inodes.parts(nodeid), ctx)
        self._reply(unique, 0, target)

    def _op_mkdir(self, unique, nodeid, ctx, body):
        mode, _umask = struct.unpack_from("<II", body, 0)
        name = body[8:].rstrip(b"\x00").decode("utf-8", "surrogateescape")
        parts = self.inodes.parts(nodeid) + (name,)
        self.ops.mkdir(parts, mode & 0o7777, ctx)
        st = self.ops.getattr(parts, None, ctx)
        self._entry_reply(unique, nodeid, name, st)

    def _op_mknod(self, unique, nodeid, ctx, body):
        mode, _rdev, _umask, _pad = struct.unpack_from("<IIII", body, 0)
        if not stat_mod.S_ISREG(mode):
            raise NotSupported("only regular files")
        name = body[16:].rstrip(b"\x00").decode("utf-8", "surrogateescape")
        parts = self.inodes.parts(nodeid) + (name,)
        self.ops.mknod(parts, mode & 0o7777, ctx)
        st = self.ops.getattr(parts, None, ctx)
        self._entry_reply(unique, nodeid, name, st)

    def _op_unlink(self, unique, nodeid, ctx, body):
        name = body.rstrip(b"\x00").decode("utf-8", "surrogateescape")
        parts = self.inodes.parts(nodeid) + (name,)
        self.ops.unlink(parts, ctx)
        self.inodes.detach(nodeid, name)
        self._reply(unique, 0)

    def _op_rmdir(self, unique, nodeid, ctx, body):
        name = body.rstrip(b"\x00").decode("utf-8", "surrogateescape")
        parts = self.inodes.parts(nodeid) + (name,)
        self.ops.rmdir(parts, ctx)
        self.inodes.detach(nodeid, name)
        self._reply(unique, 0)

    def _op_rename_common(self, unique, nodeid, ctx, newdir, names, flags):
        RENAME_NOREPLACE = 1
        if flags & ~RENAME_NOREPLACE:
            self._reply(unique, errno.EINVAL)
            return
        old_name, new_name = names
        old_parts = self.inodes.parts(nodeid) + (old_name,)
        new_parts = self.inodes.parts(newdir) + (new_name,)
        if flags & RENAME_NOREPLACE:
            try:
                self.ops.getattr(new_parts, None, ctx)
            except YoloError:
                pass
            else:
                self._reply(unique, errno.EEXIST)
                return
        self.ops.rename(old_parts, new_parts, ctx)
        self.inodes.rename(nodeid, old_name, newdir, new_name)
        self._reply(unique, 0)

    def _op_rename(self, unique, nodeid, ctx, body):
        (newdir,) = struct.unpack_from("<Q", body, 0)
        names = body[8:].split(b"\x00")[:2]
        self._op_rename_common(
            unique, nodeid, ctx, newdir,
            [n.decode("utf-8", "surrogateescape") for n in names], 0,
        )

    def _op_rename2(self, unique, nodeid, ctx, body):
        newdir, flags, _pad = struct.unpack_from("<QII", body, 0)
        names = body[16:].split(b"\x00")[:2]
        self._op_rename_common(
            unique, nodeid, ctx, newdir,
            [n.decode("utf-8", "surrogateescape") for n in names], flags,
        )

    def _op_link(self, unique, nodeid, ctx, body):
        raise NotSupported("hard links are not staged")

    def _op_symlink(self, unique, nodeid, ctx, body):
        raise NotSupported("symlink creation is not staged")

    # --- file io ---

    def _op_open(self, unique, nodeid, ctx, body):
        (flags, _unused) = struct.unpack_from("<II", body, 0)
        parts = self.inodes.parts(nodeid)
        handle = self.ops.open(parts, flags, ctx)
        fh = self._new_fh(handle, self._handles)
        self._reply(unique, 0, _OPEN_OUT.pack(fh, 0, 0))

    def _op_create(self, unique, nodeid, ctx, body):
        flags, mode, _umask, _pad = struct.unpack_from("<IIII", body, 0)
        name = body[16:].rstrip(b"\x00").decode("utf-8", "surrogateescape")
        parts = self.inodes.parts(nodeid) + (name,)
        handle = self.ops.create(parts, flags, mode & 0o7777, ctx)
        st = self.ops.getattr(parts, handle, ctx)
        fh = self._new_fh(handle, self._handles)
        entry_nodeid = self.inodes.remember(nodeid, name)
        payload = (
            _ENTRY_HEAD.pack(entry_nodeid, 0, 0, 0, 0, 0)
            + _pack_attr(entry_nodeid, st)
            + _OPEN_OUT.pack(fh, 0, 0)
        )
        self._reply(unique, 0, payload)

    def _op_read(self, unique, nodeid, ctx, body):
        fh, offset, size, _rflags, _lock, _flags, _pad = _READ_IN.unpack_from(body, 0)
        handle = self._handles.get(fh)
        if handle is None:
            raise YoloError("stale file handle")
        self._reply(unique, 0, self.ops.read(handle, size, offset))

    def _op_write(self, unique, nodeid, ctx, body):
        fh, offset, size, _wflags, _lock, _flags, _pad = _WRITE_IN.unpack_from(body, 0)
        data = body[_WRITE_IN.size : _WRITE_IN.size + size]
        handle = self._handles.get(fh)
        if handle is None:
            raise YoloError("stale file handle")
        written = self.ops.write(handle, data, offset)
        self._reply(unique, 0, _WRITE_OUT.pack(written, 0))

    def _op_flush(self, unique, nodeid, ctx, body):
        (fh,) = struct.unpack_from("<Q", body, 0)
        handle = self._handles.get(fh)
        if handle is not None:
            self.ops.flush(handle)
        self._reply(unique, 0)

    def _op_fsync(self, unique, nodeid, ctx, body):
        fh, _flags = struct.unpack_from("<QI", body, 0)
        handle = self._handles.get(fh)
        if handle is not None:
            self.ops.fsync(handle)
        self._reply(unique, 0)

    def _op_release(self, unique, nodeid, ctx, body):
        (fh,) = struct.unpack_from("<Q", body, 0)
        handle = self._handles.pop(fh, None)
        if handle is not None:
            self.ops.release(handle)
        self._reply(unique, 0)

    # --- directories ---

    def _op_opendir(self, unique, nodeid, ctx, body):
        parts = self.inodes.parts(nodeid)
        entries = self.ops.readdir(parts, ctx)  # [(name, d_type)]
        fh = self._new_fh(list(entries), self._dir_handles)
        self._reply(unique, 0, _OPEN_OUT.pack(fh, 0, 0))

    def _op_readdir(self, unique, nodeid, ctx, body):
        fh, offset, size, _rflags, _lock, _flags, _pad = _READ_IN.unpack_from(body, 0)
        entries = self._dir_handles.get(fh)
        if entries is None:
            raise YoloError("stale directory handle")
        out = bytearray()
        idx = offset
        batch = len(entries) if self._pad_dirents else min(len(entries), idx + 1)
        while idx < batch:
            # gVisor consumes a single dirent per round and re-asks at the
            # next off cookie; feeding it more than one desyncs its walker
            name, dtype = entries[idx]
            raw = name.encode("utf-8", "surrogateescape")
            entry_len = 24 + len(raw)
            padded = (entry_len + 7) & ~7 if self._pad_dirents else entry_len
            if len(out) + padded > size:
                break
            out += struct.pack("<QQII", idx + 1000, idx + 1, len(raw), dtype)
            out += raw
            out += b"\x00" * (padded - entry_len)
            idx += 1
        self._reply(unique, 0, bytes(out))

    def _op_releasedir(self, unique, nodeid, ctx, body):
        (fh,) = struct.unpack_from("<Q", body, 0)
        self._dir_handles.pop(fh, None)
        self._reply(unique, 0)

    def _op_fsyncdir(self, unique, nodeid, ctx, body):
        self._reply(unique, 0)

    def _op_access(self, unique, nodeid, ctx, body):
        (mask, _pad) = struct.unpack_from("<II", body, 0)
        self.ops.access(self.inodes.parts(nodeid), mask, ctx)
        self._reply(unique, 0)

    def _op_statfs(self, unique, nodeid, ctx, body):
        sv = self.ops.statfs()
        payload = _STATFS_OUT.pack(
            sv.f_blocks, sv.f_bfree, sv.f_bavail, sv.f_files, sv.f_ffree,
            sv.f_bsize, sv.f_namemax, sv.f_frsize, 0, *([0] * 6),
        )
        self._reply(unique, 0, payload)

    def _op_xattr_unsupported(self, unique, nodeid, ctx, body):
        self._reply(unique, errno.ENOSYS)

    def _op_destroy(self, unique, nodeid, ctx, body):
        self._reply(unique, 0)

    # ------------------------------------------------------------------

    def join(self):
        self._thread.join()

    @property
    def alive(self):
        return self._alive

    def unmount(self):
        self._stopping = True
        self._alive = False
        unmount(self.mountpoint)
        self._thread.join(timeout=0.5)
        if self._thread.is_alive():
            # reader parked in read(): close the device fd to kill the
            # connection; a read that stays parked anyway is a daemon thread
            # and dies with the process
            try:
                os.close(self._fd)
            except OSError:
                pass
            self._thread.join(timeout=0.5)
        self._pool.shutdown(wait=False)


_HANDLERS = {
    LOOKUP: FuseMount._op_lookup,
    GETATTR: FuseMount._op_getattr,
    SETATTR: FuseMount._op_setattr,
    READLINK: FuseMount._op_readlink,
    SYMLINK: FuseMount._op_symlink,
    MKNOD: FuseMount._op_mknod,
    MKDIR: FuseMount._op_mkdir,
    UNLINK: FuseMount._op_unlink,
    RMDIR: FuseMount._op_rmdir,
    RENAME: FuseMount._op_rename,
    RENAME2: FuseMount._op_rename2,
    LINK: FuseMount._op_link,
    OPEN: FuseMount._op_open,
    READ: FuseMount._op_read,
    WRITE: FuseMount._op_write,
    STATFS: FuseMount._op_statfs,
    RELEASE: FuseMount._op_release,
    FSYNC: FuseMount._op_fsync,
    SETXATTR: FuseMount._op_xattr_unsupported,
    GETXATTR: FuseMount._op_xattr_unsupported,
    LISTXATTR: FuseMount._op_xattr_unsupported,
    REMOVEXATTR: FuseMount._op_xattr_unsupported,
    FLUSH: FuseMount._op_flush,
    OPENDIR: FuseMount._op_opendir,
    READDIR: FuseMount._op_readdir,
    RELEASEDIR: FuseMount._op_releasedir,
    FSYNCDIR: FuseMount._op_fsyncdir,
    ACCESS: FuseMount._op_access,
    CREATE: FuseMount._op_create,
    DESTROY: FuseMount._op_destroy,
}


def _proc_name(pid):
    try:
        with open(f"/proc/{pid}/comm", "rb") as f:
            return f.read().strip().decode("utf-8", "replace")
    except OSError:
        return f"pid:{pid}"


class SessionOps:
    """Bridge backend routing through a MountSession."""

    def __init__(self, session):
        self.session = session

    @staticmethod
    def _proc(ctx):
        return _proc_name(ctx[2])

    def getattr(self, parts, handle, ctx):
        if handle is not None:
            return os.fstat(handle.fd)
        st, _origin = self.session.getattr(parts, self._proc(ctx))
        return st

    def setattr(self, parts, handle, fields, ctx):
        proc = self._proc(ctx)
        if "mode" in fields:
            self.session.chmod(parts, fields["mode"])
        if "own" in fields:
            self.session.chown(parts, *fields["own"])
        if "size" in fields:
            if handle is not None and handle.writable:
                os.ftruncate(handle.fd, fields["size"])
            else:
                self.session.truncate(parts, fields["size"], proc)
        if "times" in fields:
            self.session.utimens(parts, fields["times"], proc)
        return self.getattr(parts, handle, ctx)

    def readlink(self, parts, ctx):
        return os.fsencode(self.session.readlink(parts, self._proc(ctx)))

    def mkdir(self, parts, mode, ctx):
        self.session.create_dir(parts, mode, self._proc(ctx))

    def mknod(self, parts, mode, ctx):
        handle = self.session.open(
            parts, write=True, create=True, excl=True, mode=mode,
            process=self._proc(ctx),
        )
        self.session.release(handle)

    def unlink(self, parts, ctx):
        self.session.remove(parts, is_dir=False, process=self._proc(ctx))

    def rmdir(self, parts, ctx):
        self.session.remove(parts, is_dir=True, process=self._proc(ctx))

    def rename(self, old_parts, new_parts, ctx):
        self.session.rename(old_parts, new_parts, self._proc(ctx))

    def open(self, parts, flags, ctx):
        acc = flags & os.O_ACCMODE
        write = acc in (os.O_WRONLY, os.O_RDWR)
        return self.session.open(
            parts,
            write=write,
            trunc=bool(flags & os.O_TRUNC),
            create=bool(flags & os.O_CREAT),
            excl=bool(flags & os.O_EXCL),
            process=self._proc(ctx),
        )

    def create(self, parts, flags, mode, ctx):
        return self.session.open(
            parts,
            write=True,
            trunc=bool(flags & os.O_TRUNC),
            create=True,
            excl=bool(flags & os.O_EXCL),
            mode=mode,
            process=self._proc(ctx),
        )

    def read(self, handle, size, offset):
        return self.session.read(handle, size, offset)

    def write(self, handle, data, offset):
        return self.session.write(handle, data, offset)

    def flush(self, handle):
        pass

    def fsync(self, handle):
        self.session.fsync(handle)

    def release(self, handle):
        self.session.release(handle)

    def readdir(self, parts, ctx):
        return self.session.readdir_types(parts, self._proc(ctx))

    def access(self, parts, mask, ctx):
        self.session.access(
            parts,
            want_write=bool(mask & os.W_OK),
            want_read=bool(mask & os.R_OK),
            process=self._proc(ctx),
        )

    def statfs(self):
        return self.session.statfs()


class _PassHandle:
    __slots__ = ("fd", "writable")

    def __init__(self, fd, writable):
        self.fd = fd
        self.writable = writable


class PassthroughOps:
    """Null control backend: same bridge, no staging logic."""

    def __init__(self, root):
        self.root = os.path.abspath(os.fspath(root))

    def _p(self, parts):
        return os.path.join(self.root, *parts) if parts else self.root

    def getattr(self, parts, handle, ctx):
        if handle is not None:
            return os.fstat(handle.fd)
        return os.lstat(self._p(parts))

    def setattr(self, parts, handle, fields, ctx):
        path = self._p(parts)
        if "mode" in fields:
            os.chmod(path, fields["mode"])
        if "own" in fields:
            os.chown(path, *fields["own"])
        if "size" in fields:
            if handle is not None:
                os.ftruncate(handle.fd, fields["size"])
            else:
                os.truncate(path, fields["size"])
        if "times" in fields:
            os.utime(path, fields["times"])
        return self.getattr(parts, handle, ctx)

    def readlink(self, parts, ctx):
        return os.fsencode(os.readlink(self._p(parts)))

    def mkdir(self, parts, mode, ctx):
        os.mkdir(self._p(parts), mode)

    def mknod(self, parts, mode, ctx):
        os.close(os.open(self._p(parts), os.O_CREAT | os.O_EXCL | os.O_WRONLY, mode))

    def unlink(self, parts, ctx):
        os.unlink(self._p(parts))

    def rmdir(self, parts, ctx):
        os.rmdir(self._p(parts))

    def rename(self, old_parts, new_parts, ctx):
        os.rename(self._p(old_parts), self._p(new_parts))

    def open(self, parts, flags, ctx):
        acc = flags & os.O_ACCMODE
        fd = os.open(self._p(parts), flags & ~os.O_NOFOLLOW)
        return _PassHandle(fd, acc != os.O_RDONLY)

    def create(self, parts, flags, mode, ctx):
        fd = os.open(self._p(parts), (flags & ~os.O_NOFOLLOW) | os.O_CREAT, mode)
        return _PassHandle(fd, True)

    def read(self, handle, size, offset):
        return os.pread(handle.fd, size, offset)

    def write(self, handle, data, offset):
        return os.pwrite(handle.fd, data, offset)

    def flush(self, handle):
        pass

    def fsync(self, handle):
        os.fsync(handle.fd)

    def release(self, handle):
        try:
            os.close(handle.fd)
        except OSError:
            pass

    def readdir(self, parts, ctx):
        out = []
        with os.scandir(self._p(parts)) as it:
            for entry in it:
                try:
                    dtype = (entry.stat(follow_symlinks=False).st_mode >> 12) & 0xF
                except OSError:
                    dtype = 0
                out.append((entry.name, dtype))
        out.sort()
        return out

    def access(self, parts, mask, ctx):
        if not os.access(self._p(parts), mask):
            raise OSError(errno.EACCES, "access denied")

    def statfs(self):
        return os.statvfs(self.root)


def fuse_available():
    return os.path.exists("/dev/fuse")


def mount_session(session, mountpoint, workers=16):
    os.makedirs(mountpoint, exist_ok=True)
    return FuseMount(SessionOps(session), mountpoint, workers)


def mount_passthrough(root, mountpoint, workers=16):
    os.makedirs(mountpoint, exist_ok=True)
    return FuseMount(PassthroughOps(root), mountpoint, workers)
