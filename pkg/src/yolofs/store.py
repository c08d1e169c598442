"""Flat file store: staged contents decoupled from directory structure.

Objects live at `.yolo/files/<hh>/<ino>` where `hh` is two lowercase hex
digits of ino % 256 (keeps directories small) and ino is a monotonically
increasing integer, persisted in `.yolo/next_ino` so a restarted session
never reuses one.  Directories staged by mkdir are empty marker dirs here;
their children live in the override tree.
"""

from __future__ import annotations

import os
import shutil
import threading

from yolofs.errors import StoreError


class FileStore:
    def __init__(self, root):
        self.root = os.fspath(root)
        self.files_dir = os.path.join(self.root, "files")
        self._ino_path = os.path.join(self.root, "next_ino")
        self._lock = threading.Lock()
        os.makedirs(self.files_dir, exist_ok=True)
        self.next_ino = self._load_next_ino()

    def _load_next_ino(self):
        try:
            with open(self._ino_path) as f:
                value = int(f.read().strip())
                if value < 1:
                    raise ValueError(value)
                return value
        except FileNotFoundError:
            return 1
        except ValueError as e:
            raise StoreError(f"corrupt next_ino file: {e}") from None

    def _persist_next_ino(self):
        tmp = self._ino_path + ".tmp"
        with open(tmp, "w") as f:
            f.write(f"{self.next_ino}\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self._ino_path)

    def path_of(self, ino):
        return os.path.join(self.files_dir, f"{ino % 256:02x}", str(ino))

    def allocate(self, kind="regular", mode=None):
        """Create an empty store object and return its fresh ino."""
        with self._lock:
            ino = self.next_ino
            path = self.path_of(ino)
            try:
                os.makedirs(os.path.dirname(path), exist_ok=True)
                if kind == "directory":
                    os.mkdir(path, mode if mode is not None else 0o755)
                else:
                    fd = os.open(
                        path,
                        os.O_WRONLY | os.O_CREAT | os.O_EXCL,
                        mode if mode is not None else 0o644,
                    )
                    os.close(fd)
            except OSError as e:
                raise StoreError(f"cannot allocate store object: {e}") from e
            self.next_ino = ino + 1
            self._persist_next_ino()
            return ino

    def copy_up(self, base_path):
        """Stage a byte-for-byte copy of a base file; returns the new ino."""
        ino = self.allocate("regular")
        dst = self.path_of(ino)
        try:
            shutil.copyfile(base_path, dst)
            shutil.copymode(base_path, dst)
        except OSError as e:
            raise StoreError(f"copy-up of {base_path!r} failed: {e}") from e
        return ino

    def ensure_current(self, ino, file_gen, global_gen):
        """Copy-on-write gate before writing a staged file.

        Same generation: write in place.  Stale: the bytes belong to a
        snapshot someone may travel back to, so copy them to a fresh ino and
        leave the old object frozen forever.
        """
        if file_gen == global_gen:
            return ino
        fresh = self.allocate("regular")
        try:
            src = self.path_of(ino)
            dst = self.path_of(fresh)
            shutil.copyfile(src, dst)
            shutil.copymode(src, dst)
        except OSError as e:
            raise StoreError(f"copy-on-write of ino {ino} failed: {e}") from e
        return fresh

    def size_bytes(self):
        """Total bytes of all store objects (regular files only)."""
        total = 0
        for dirpath, _, filenames in os.walk(self.files_dir):
            for name in filenames:
                total += os.lstat(os.path.join(dirpath, name)).st_size
        return total

    def reset(self):
        """Discard all staged objects; inos restart at 1."""
        with self._lock:
            shutil.rmtree(self.files_dir, ignore_errors=True)
            os.makedirs(self.files_dir, exist_ok=True)
            self.next_ino = 1
            self._persist_next_ino()
