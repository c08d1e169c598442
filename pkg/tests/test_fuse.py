"""Kernel-mount integration: real processes doing real syscalls against the
bridge, for both the null pass-through backend and full sessions."""

import os
import shutil
import subprocess
import time

import pytest

from yolofs import fusebridge
from yolofs.permissions import RuleTree
from yolofs.vfs import MountSession

from oracle import disk_view

pytestmark = pytest.mark.skipif(
    not fusebridge.fuse_available(), reason="/dev/fuse not available"
)


def sh(cmd, cwd):
    # preexec_fn forces fork over vfork: vfork suspends every thread of this
    # process, including the in-process fuse reader the child's chdir(cwd)
    # into the mount is waiting on
    return subprocess.run(
        ["sh", "-c", cmd],
        cwd=cwd,
        capture_output=True,
        text=True,
        timeout=30,
        preexec_fn=lambda: None,
    )


@pytest.fixture
def base(tmp_path):
    root = tmp_path / "base"
    d1 = root / "d1"
    d1.mkdir(parents=True)
    (d1 / "x").write_bytes(b"base x\n")
    (d1 / "y").write_bytes(b"base y\n")
    (d1 / "z").write_bytes(b"base z\n")
    return root


@pytest.fixture
def passthrough(base, tmp_path):
    mnt = tmp_path / "mnt_null"
    fm = fusebridge.mount_passthrough(base, mnt)
    yield str(mnt)
    fm.unmount()


@pytest.fixture
def session_mount(base, tmp_path):
    session = MountSession(base, rules=RuleTree([("/", "allow")]))
    mnt = tmp_path / "mnt"
    fm = fusebridge.mount_session(session, mnt)
    yield str(mnt), session, base
    fm.unmount()
    session.close()


class TestPassthrough:
    def test_listing_and_read(self, passthrough):
        assert sorted(os.listdir(passthrough)) == ["d1"]
        assert sorted(os.listdir(os.path.join(passthrough, "d1"))) == ["x", "y", "z"]
        with open(os.path.join(passthrough, "d1", "x"), "rb") as f:
            assert f.read() == b"base x\n"

    def test_shell_roundtrip(self, passthrough, base):
        r = sh("echo hello > created && mkdir sub && mv created sub/renamed", passthrough)
        assert r.returncode == 0, r.stderr
        assert (base / "sub" / "renamed").read_text() == "hello\n"
        r = sh("rm sub/renamed && rmdir sub", passthrough)
        assert r.returncode == 0, r.stderr
        assert not (base / "sub").exists()

    def test_stat_fields(self, passthrough, base):
        st = os.stat(os.path.join(passthrough, "d1", "x"))
        real = os.stat(base / "d1" / "x")
        assert st.st_size == real.st_size
        assert st.st_mode == real.st_mode


class TestSessionMount:
    def test_walkthrough_via_shell(self, session_mount):
        mnt, session, base = session_mount
        before = disk_view(base)
        steps = [
            "echo > d1/x",
            "mv d1/y d1/x",
            "mkdir d3",
            "mv d1 d3/d2",
            "echo appended >> d3/d2/x",
        ]
        for step in steps:
            r = sh(step, mnt)
            assert r.returncode == 0, f"{step}: {r.stderr}"
        assert session.journal.read_bytes() == (
            b"S\td1/x\t1\n"
            b"R\td1/y\td1/x\n"
            b"S\td3\t2\n"
            b"R\td1\td3/d2\n"
            b"S\td3/d2/x\t3\n"
        )
        # mounted view reflects the staged state
        assert sorted(os.listdir(mnt)) == ["d3"]
        assert sorted(os.listdir(os.path.join(mnt, "d3", "d2"))) == ["x", "z"]
        with open(os.path.join(mnt, "d3", "d2", "x"), "rb") as f:
            assert f.read() == b"base y\nappended\n"
        # base untouched
        assert disk_view(base) == before

    def test_deletions_staged_not_applied(self, session_mount):
        mnt, session, base = session_mount
        r = sh("rm d1/x d1/y", mnt)
        assert r.returncode == 0, r.stderr
        assert sorted(os.listdir(os.path.join(mnt, "d1"))) == ["z"]
        assert (base / "d1" / "x").exists()
        records = session.journal.records()
        assert ("D", "d1/x") in records and ("D", "d1/y") in records

    def test_python_subprocess_workload(self, session_mount):
        mnt, session, base = session_mount
        code = (
            "import pathlib\n"
            "root = pathlib.Path('.')\n"
            "(root / 'out').mkdir()\n"
            "for i in range(5):\n"
            "    (root / 'out' / f'f{i}.txt').write_text(str(i) * 10)\n"
            "data = (root / 'd1' / 'z').read_text()\n"
            "(root / 'out' / 'copy').write_text(data)\n"
        )
        r = subprocess.run(
            ["python3", "-c", code],
            cwd=mnt,
            capture_output=True,
            text=True,
            timeout=30,
            preexec_fn=lambda: None,
        )
        assert r.returncode == 0, r.stderr
        assert (
            open(os.path.join(mnt, "out", "copy")).read() == "base z\n"
        )
        assert not (base / "out").exists()

    def test_overwrite_keeps_mode(self, session_mount):
        mnt, session, base = session_mount
        os.chmod(base / "d1" / "x", 0o755)
        r = sh("echo new > d1/x", mnt)
        assert r.returncode == 0, r.stderr
        st = os.stat(os.path.join(mnt, "d1", "x"))
        assert st.st_mode & 0o777 == 0o755

    def test_append_copies_then_appends(self, session_mount):
        mnt, session, base = session_mount
        r = sh("echo more >> d1/z", mnt)
        assert r.returncode == 0, r.stderr
        with open(os.path.join(mnt, "d1", "z"), "rb") as f:
            assert f.read() == b"base z\nmore\n"
        assert (base / "d1" / "z").read_bytes() == b"base z\n"

    def test_yolo_dir_hidden(self, session_mount):
        mnt, _session, _base = session_mount
        assert ".yolo" not in os.listdir(mnt)
        assert not os.path.exists(os.path.join(mnt, ".yolo"))

    def test_travel_switches_view(self, session_mount):
        mnt, session, base = session_mount
        session.snapshot("clean")
        r = sh("rm d1/x && echo junk > d1/junk", mnt)
        assert r.returncode == 0, r.stderr
        assert not os.path.exists(os.path.join(mnt, "d1", "x"))
        session.travel(1)
        assert os.path.exists(os.path.join(mnt, "d1", "x"))
        assert not os.path.exists(os.path.join(mnt, "d1", "junk"))

    def test_commit_through_mount_view(self, session_mount):
        mnt, session, base = session_mount
        r = sh("echo done > result && rm d1/y", mnt)
        assert r.returncode == 0, r.stderr
        expected = disk_view(str(mnt))
        session.commit()
        assert disk_view(base) == expected


class TestPermissionsThroughKernel:
    @pytest.fixture
    def guarded(self, base, tmp_path):
        rules = RuleTree(
            [("/", "allow"), ("d1/y", "hidden"), ("d1/z", "deny"), ("d1", "read_only"),
             ("d1/x", "allow")]
        )
        session = MountSession(base, rules=rules)
        mnt = tmp_path / "mnt_rules"
        fm = fusebridge.mount_session(session, mnt)
        yield str(mnt), session
        fm.unmount()
        session.close()

    def test_hidden_invisible(self, guarded):
        mnt, _ = guarded
        assert "y" not in os.listdir(os.path.join(mnt, "d1"))
        assert not os.path.exists(os.path.join(mnt, "d1", "y"))

    def test_deny_visible_but_blocked(self, guarded):
        mnt, _ = guarded
        assert "z" in os.listdir(os.path.join(mnt, "d1"))
        os.stat(os.path.join(mnt, "d1", "z"))  # metadata visible
        r = sh("cat d1/z", mnt)
        assert r.returncode != 0

    def test_read_only_blocks_writes(self, guarded):
        mnt, _ = guarded
        r = sh("echo nope > d1/new", mnt)
        assert r.returncode != 0
        r = sh("rm d1/z", mnt)
        assert r.returncode != 0
        r = sh("cat d1/x", mnt)
        assert r.returncode == 0

    def test_specific_allow_overrides(self, guarded):
        mnt, _ = guarded
        r = sh("echo fine > d1/x", mnt)
        assert r.returncode == 0, r.stderr


class TestUnmount:
    def test_unmount_releases(self, base, tmp_path):
        mnt = tmp_path / "mnt_tmp"
        session = MountSession(base, rules=RuleTree([("/", "allow")]))
        fm = fusebridge.mount_session(session, mnt)
        assert os.listdir(mnt) == ["d1"]
        fm.unmount()
        session.close()
        assert os.listdir(mnt) == []
        assert not fm.alive
