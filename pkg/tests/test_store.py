"""Flat file store: allocation, copy-up, generation CoW, sharding."""

import hashlib
import os

import pytest

from yolofs.errors import StoreError
from yolofs.store import FileStore


@pytest.fixture
def store(tmp_path):
    return FileStore(tmp_path / ".yolo")


def blob(store, ino):
    with open(store.path_of(ino), "rb") as f:
        return f.read()


class TestAllocate:
    def test_first_allocation_is_one(self, store):
        assert store.allocate() == 1

    def test_monotonic(self, store):
        inos = [store.allocate() for _ in range(5)]
        assert inos == [1, 2, 3, 4, 5]

    def test_directory_kind(self, store):
        ino = store.allocate("directory")
        assert os.path.isdir(store.path_of(ino))

    def test_persisted_across_instances(self, store, tmp_path):
        store.allocate()
        store.allocate()
        fresh = FileStore(tmp_path / ".yolo")
        assert fresh.allocate() == 3

    def test_sharding(self, store):
        # shard dir is two hex digits of ino % 256
        ino = store.allocate()
        assert f"/{ino % 256:02x}/" in store.path_of(ino).replace(os.sep, "/")
        assert store.path_of(257).endswith("files/01/257")

    def test_shard_fanout_bound(self, store):
        for _ in range(600):
            store.allocate()
        for shard in os.listdir(store.files_dir):
            count = len(os.listdir(os.path.join(store.files_dir, shard)))
            assert count <= (600 // 256) + 1


class TestCopyUp:
    def test_byte_identical(self, store, tmp_path):
        src = tmp_path / "base_file"
        src.write_bytes(b"hello\nworld")
        ino = store.copy_up(src)
        assert blob(store, ino) == b"hello\nworld"
        assert src.read_bytes() == b"hello\nworld"

    def test_empty_file(self, store, tmp_path):
        src = tmp_path / "empty"
        src.touch()
        ino = store.copy_up(src)
        assert blob(store, ino) == b""

    def test_mode_bits_copied(self, store, tmp_path):
        src = tmp_path / "exe"
        src.write_bytes(b"#!/bin/sh\n")
        os.chmod(src, 0o755)
        ino = store.copy_up(src)
        assert os.stat(store.path_of(ino)).st_mode & 0o777 == 0o755

    def test_vanished_source(self, store, tmp_path):
        with pytest.raises(StoreError):
            store.copy_up(tmp_path / "never_there")


class TestEnsureCurrent:
    def test_same_generation_identity(self, store):
        ino = store.allocate()
        assert store.ensure_current(ino, 0, 0) == ino

    def test_stale_generation_copies(self, store):
        ino = store.allocate()
        with open(store.path_of(ino), "wb") as f:
            f.write(b"v1")
        fresh = store.ensure_current(ino, 0, 1)
        assert fresh != ino
        assert blob(store, fresh) == b"v1"
        # the old object is frozen: mutate the copy, the original is untouched
        with open(store.path_of(fresh), "wb") as f:
            f.write(b"v2")
        assert blob(store, ino) == b"v1"

    def test_one_cow_per_write_not_per_snapshot(self, store):
        # two generations passed, still exactly one fresh allocation
        ino = store.allocate()
        before = store.next_ino
        fresh = store.ensure_current(ino, 0, 2)
        assert store.next_ino == before + 1
        assert store.ensure_current(fresh, 2, 2) == fresh
        assert store.next_ino == before + 1


class TestImmutability:
    def test_past_generation_checksums_stable(self, store):
        ino = store.allocate()
        with open(store.path_of(ino), "wb") as f:
            f.write(b"generation zero bytes")
        digest = hashlib.sha256(blob(store, ino)).hexdigest()
        current = ino
        for gen in range(1, 4):
            current = store.ensure_current(current, gen - 1, gen)
            with open(store.path_of(current), "ab") as f:
                f.write(b" + more")
        assert hashlib.sha256(blob(store, ino)).hexdigest() == digest


class TestReset:
    def test_reset_restarts_inos(self, store):
        store.allocate()
        store.allocate()
        store.reset()
        assert store.allocate() == 1
        assert os.path.isdir(store.files_dir)
