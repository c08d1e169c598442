"""Randomized session harness: drives a MountSession and the naive oracle
through identical op sequences and checks the mounted view after every
operation, abort safety against the pre-session base, and post-commit base
equality against the oracle's materialized state."""

from __future__ import annotations

import os
import random
import shutil

from yolofs.errors import YoloError
from yolofs.permissions import RuleTree
from yolofs.vfs import MountSession

from oracle import NaiveFs, OracleError, disk_view, mount_view

NAMES = ["a", "b", "c", "d", "e", "f", "g", "h", "sub", "deep", "x", "y"]

OPS = (
    ["write"] * 3
    + ["trunc"] * 2
    + ["append"] * 2
    + ["create"] * 2
    + ["mkdir"] * 2
    + ["unlink"] * 2
    + ["rmdir"]
    + ["rename"] * 3
    + ["readdir"]
)


def make_template(path):
    """Small base tree the sequences start from."""
    os.makedirs(os.path.join(path, "sub", "deep"))
    files = {
        "a": b"alpha\n",
        "b": b"bravo\n",
        "sub/c": b"charlie\n",
        "sub/deep/d": b"delta\n",
    }
    for rel, data in files.items():
        with open(os.path.join(path, rel), "wb") as f:
            f.write(data)
    return files


class SequenceRunner:
    def __init__(self, base_dir, rng, max_markers=8):
        self.base = os.fspath(base_dir)
        self.rng = rng
        self.session = MountSession(self.base, rules=RuleTree([("/", "allow")]))
        self.oracle = NaiveFs.from_base(self.base)
        self.ops_done = []  # replayable (op, args) trace
        self.markers_left = max_markers

    def close(self):
        self.session.close()

    # ------------------------------------------------------------------

    def random_path(self, want_existing):
        view = self.oracle.view()
        if want_existing and view:
            return self.rng.choice(sorted(view))
        # trees stay within depth 4: parents for fresh names at depth <= 3
        dirs = [""] + [
            p for p, v in view.items() if v == "dir" and p.count("/") < 3
        ]
        parent = self.rng.choice(sorted(dirs))
        name = self.rng.choice(NAMES)
        return f"{parent}/{name}" if parent else name

    def step(self, op=None):
        rng = self.rng
        op = op or rng.choice(OPS)
        if op in ("write", "trunc", "append", "create"):
            p = self.random_path(want_existing=rng.random() < 0.5)
            data = f"{op}:{rng.randrange(1 << 20)}\n".encode()
            args = (p, data)
        elif op in ("mkdir", "unlink", "rmdir", "readdir"):
            args = (self.random_path(want_existing=rng.random() < 0.6),)
        elif op == "rename":
            args = (
                self.random_path(want_existing=True),
                self.random_path(want_existing=rng.random() < 0.2),
            )
        elif op in ("snapshot", "travel"):
            if self.markers_left <= 0:
                return
            self.markers_left -= 1
            if op == "travel":
                args = (rng.randint(0, self.oracle.gen),)
            else:
                args = (f"s{len(self.ops_done)}",)
        self.apply(op, args)
        self.ops_done.append((op, args))

    def apply(self, op, args):
        """Apply one op to both sides; success and failure must agree."""
        sys_err = ora_err = None
        try:
            self._apply_session(self.session, op, args)
        except YoloError as e:
            sys_err = e
        try:
            self._apply_oracle(op, args)
        except OracleError as e:
            ora_err = e
        assert (sys_err is None) == (ora_err is None), (
            f"divergence on {op}{args}: mount={sys_err!r} oracle={ora_err!r}"
        )

    @staticmethod
    def _apply_session(session, op, args):
        if op == "write":
            h = session.open(args[0], write=True, create=True)
            try:
                session.write(h, args[1], 0)
                os.ftruncate(h.fd, len(args[1]))
            finally:
                session.release(h)
        elif op == "trunc":
            h = session.open(args[0], write=True, create=True, trunc=True)
            try:
                session.write(h, args[1], 0)
            finally:
                session.release(h)
        elif op == "append":
            h = session.open(args[0], write=True, create=True)
            try:
                size = os.fstat(h.fd).st_size
                session.write(h, args[1], size)
            finally:
                session.release(h)
        elif op == "create":
            session.release(session.open(args[0], write=True, create=True))
        elif op == "mkdir":
            session.create_dir(args[0])
        elif op == "unlink":
            session.remove(args[0], is_dir=False)
        elif op == "rmdir":
            session.remove(args[0], is_dir=True)
        elif op == "rename":
            session.rename(args[0], args[1])
        elif op == "readdir":
            session.readdir(args[0])
        elif op == "snapshot":
            session.snapshot(args[0])
        elif op == "travel":
            session.travel(args[0])
        else:
            raise AssertionError(f"unknown op {op}")

    def _apply_oracle(self, op, args):
        o = self.oracle
        if op == "write":
            # plain write at offset 0 + truncate to length: net effect on a
            # fresh or existing file is full replacement
            if args[0] in o.dirs:
                raise OracleError("is a directory")
            o._need_parent(args[0])
            o.files[args[0]] = args[1]
        elif op == "trunc":
            o.write_trunc(*args)
        elif op == "append":
            o.append(*args)
        elif op == "create":
            o.create(args[0])
        elif op == "mkdir":
            o.mkdir(args[0])
        elif op == "unlink":
            o.unlink(args[0])
        elif op == "rmdir":
            o.rmdir(args[0])
        elif op == "rename":
            o.rename(*args)
        elif op == "readdir":
            o.readdir(args[0])
        elif op == "snapshot":
            o.snapshot()
        elif op == "travel":
            o.travel(args[0])


def run_sequence(
    seed,
    workdir,
    ops=18,
    markers=True,
    compare_every_op=True,
    check_abort=True,
    check_commit=True,
):
    """One full oracle sequence; raises AssertionError on any divergence."""
    rng = random.Random(seed)
    base = os.path.join(workdir, f"base-{seed}")
    os.makedirs(base)
    make_template(base)
    pre_session = disk_view(base)

    runner = SequenceRunner(base, rng)
    try:
        for i in range(ops):
            if markers and rng.random() < 0.15:
                runner.step(rng.choice(["snapshot", "travel"]))
            else:
                runner.step()
            if compare_every_op:
                assert mount_view(runner.session) == runner.oracle.view(), (
                    f"view divergence after op {i}: {runner.ops_done[-1]}"
                )
        if not compare_every_op:
            assert mount_view(runner.session) == runner.oracle.view()
        trace = list(runner.ops_done)
        final_view = runner.oracle.view()

        if check_abort:
            runner.session.abort()
            assert disk_view(base) == pre_session, "abort did not restore the base"
            assert runner.session.store.size_bytes() == 0
    finally:
        runner.close()

    if check_commit:
        # replay the same trace on a fresh session, then commit
        replay = MountSession(base, rules=RuleTree([("/", "allow")]))
        try:
            for op, args in trace:
                try:
                    SequenceRunner._apply_session(replay, op, args)
                except YoloError:
                    pass
            if check_abort:
                assert mount_view(replay) == final_view
            replay.commit()
            assert disk_view(base) == final_view, "post-commit base != oracle"
        finally:
            replay.close()

    shutil.rmtree(base)
