"""Performance suites.

All acceptance-bearing numbers are relative or structural: staged-file I/O is
compared against a null pass-through mount of the same bridge, metadata
latency is compared across entry locations, snapshot scaling is a ratio
against the single-snapshot case, and commit cost is a linearity fit.
Absolute figures depend entirely on the sandbox and are reported for context
only.

Suites (also reachable as `yolo bench <suite>`):

    io      seq/rand x read/write on a staged 1 GB file at 4 KB requests,
            against the null mount
    meta    create/stat/readdir/rename/unlink latency with the target in the
            base, a past snapshot, or the staging area; plus stat overhead
            with the permission engine on vs off
    snap    create-new / read-untouched latency after k snapshots,
            k = 1..512 doubling
    commit  commit wall time vs live record count, linear fit
    core    compiled extension vs pure-Python hot kernels

Every mount-based suite checksums the base tree before and after and refuses
to report if it changed.  CSV columns: suite,param,location,rep,value,unit.
"""

from __future__ import annotations

import csv
import hashlib
import os
import random
import shutil
import statistics
import sys
import tempfile
import time

from yolofs import fusebridge
from yolofs.permissions import RuleTree
from yolofs.vfs import MountSession

KB = 1024
MB = 1024 * KB


class Rows:
    def __init__(self, suite):
        self.suite = suite
        self.rows = []  # dicts: suite,param,location,rep,value,unit

    def add(self, param, location, rep, value, unit):
        self.rows.append(
            {
                "suite": self.suite,
                "param": param,
                "location": location,
                "rep": rep,
                "value": f"{value:.6g}",
                "unit": unit,
            }
        )

    def cells(self):
        grouped = {}
        for r in self.rows:
            grouped.setdefault((r["param"], r["location"], r["unit"]), []).append(
                float(r["value"])
            )
        return grouped

    def summarize(self, out=sys.stdout):
        print(f"\n== {self.suite} ==", file=out)
        for (param, location, unit), vals in sorted(self.cells().items()):
            med = statistics.median(vals)
            cov = (statistics.pstdev(vals) / med * 100) if med and len(vals) > 1 else 0.0
            print(
                f"  {param:<34} {location:<12} median {med:>12.4g} {unit}"
                f"  (n={len(vals)}, cov {cov:.1f}%)",
                file=out,
            )

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(
                f, fieldnames=["suite", "param", "location", "rep", "value", "unit"]
            )
            w.writeheader()
            w.writerows(self.rows)


def tree_digest(root):
    """Order-stable content+structure checksum of a directory tree."""
    h = hashlib.sha256()
    root = os.fspath(root)
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d != ".yolo")
        rel = os.path.relpath(dirpath, root)
        h.update(rel.encode())
        for name in sorted(filenames):
            path = os.path.join(dirpath, name)
            h.update(name.encode())
            with open(path, "rb") as f:
                for chunk in iter(lambda: f.read(1 << 20), b""):
                    h.update(chunk)
    return h.hexdigest()


def default_workdir():
    if os.path.isdir("/dev/shm"):
        return tempfile.mkdtemp(prefix="yolobench-", dir="/dev/shm")
    return tempfile.mkdtemp(prefix="yolobench-")


def _write_file(path, size, chunk=1 << 20, seed=7):
    rng = random.Random(seed)
    block = bytes(rng.randrange(256) for _ in range(4096)) * (chunk // 4096)
    with open(path, "wb") as f:
        left = size
        while left > 0:
            n = min(chunk, left)
            f.write(block[:n])
            left -= n


class _Mounts:
    """A session mount and a null pass-through mount over twin base trees."""

    def __init__(self, workdir, populate):
        self.base_session = os.path.join(workdir, "base_session")
        self.base_null = os.path.join(workdir, "base_null")
        os.makedirs(self.base_session)
        os.makedirs(self.base_null)
        populate(self.base_session)
        populate(self.base_null)
        self.session = MountSession(
            self.base_session, rules=RuleTree([("/", "allow")])
        )
        self.mnt_session = os.path.join(workdir, "mnt_session")
        self.mnt_null = os.path.join(workdir, "mnt_null")
        self.fm_session = fusebridge.mount_session(self.session, self.mnt_session)
        self.fm_null = fusebridge.mount_passthrough(self.base_null, self.mnt_null)

    def close(self):
        self.fm_session.unmount()
        self.fm_null.unmount()
        self.session.close()


# ----------------------------------------------------------------------
# io suite


def io_suite(workdir, file_mb=1024, request_kb=4, reps=5, seed=7, out=sys.stdout):
    rows = Rows("io")
    file_size = file_mb * MB
    req = request_kb * KB

    def populate(base):
        _write_file(os.path.join(base, "blob"), file_size, seed=seed)

    free = shutil.disk_usage(workdir).free
    if free < 3 * file_size + 512 * MB:
        print(f"io suite skipped: need ~{3*file_mb} MB free, have {free//MB} MB", file=out)
        return rows

    mounts = _Mounts(workdir, populate)
    try:
        digest_before = tree_digest(mounts.base_session)
        # stage the file: first write-open copies it into the store
        h = mounts.session.open("blob", write=True)
        mounts.session.release(h)
        assert mounts.session.tree.resolve("blob")[0] == "staged"

        rng = random.Random(seed)
        blocks = file_size // req
        patterns = [
            ("seq-read", False, False),
            ("rand-read", True, False),
            ("seq-write", False, True),
            ("rand-write", True, True),
        ]
        window = max(1, min(blocks, (64 * MB) // req))
        for mnt, location in ((mounts.mnt_null, "null"), (mounts.mnt_session, "yolofs")):
            path = os.path.join(mnt, "blob")
            for name, is_rand, is_write in patterns:
                fd = os.open(path, os.O_RDWR if is_write else os.O_RDONLY)
                try:
                    payload = b"w" * req
                    for rep in range(reps):
                        offsets = (
                            [rng.randrange(blocks) * req for _ in range(window)]
                            if is_rand
                            else [((rep * window + i) % blocks) * req for i in range(window)]
                        )
                        t0 = time.perf_counter()
                        if is_write:
                            for off in offsets:
                                os.pwrite(fd, payload, off)
                        else:
                            for off in offsets:
                                os.pread(fd, req, off)
                        dt = time.perf_counter() - t0
                        rows.add(
                            f"{name}-{request_kb}k-{file_mb}m",
                            location,
                            rep,
                            window * req / dt / MB,
                            "MB/s",
                        )
                finally:
                    os.close(fd)
        if tree_digest(mounts.base_session) != digest_before:
            raise AssertionError("io suite mutated the base tree")
    finally:
        mounts.close()

    rows.summarize(out)
    _print_ratios(rows, out)
    return rows


def _print_ratios(rows, out):
    cells = rows.cells()
    print("  -- staged vs null pass-through --", file=out)
    for (param, location, unit) in sorted(cells):
        if location != "yolofs":
            continue
        null = cells.get((param, "null", unit))
        if not null:
            continue
        ratio = statistics.median(cells[(param, location, unit)]) / statistics.median(null)
        print(f"  {param:<34} ratio {ratio:.3f}", file=out)


def io_ratios(rows):
    cells = rows.cells()
    out = {}
    for (param, location, unit) in cells:
        if location == "yolofs" and (param, "null", unit) in cells:
            out[param] = statistics.median(
                cells[(param, "yolofs", unit)]
            ) / statistics.median(cells[(param, "null", unit)])
    return out


# ----------------------------------------------------------------------
# metadata suite


def meta_suite(workdir, iterations=10000, reps=5, seed=7, out=sys.stdout):
    rows = Rows("meta")
    n_files = 128

    def populate(base):
        d = os.path.join(base, "pool")
        os.makedirs(d)
        for i in range(n_files):
            with open(os.path.join(d, f"f{i}"), "wb") as f:
                f.write(b"x" * 64)

    mounts = _Mounts(workdir, populate)
    try:
        digest_before = tree_digest(mounts.base_session)
        ses = mounts.session
        # "snapshot" location: stage the pool files, then snapshot so they
        # belong to a past generation; "staged" location: fresh staged files
        os.makedirs(os.path.join(mounts.mnt_session, "snapdir"))
        for i in range(n_files):
            with open(os.path.join(mounts.mnt_session, "snapdir", f"f{i}"), "wb") as f:
                f.write(b"s" * 64)
        ses.snapshot("meta-bench")
        os.makedirs(os.path.join(mounts.mnt_session, "stagedir"))
        for i in range(n_files):
            with open(os.path.join(mounts.mnt_session, "stagedir", f"f{i}"), "wb") as f:
                f.write(b"t" * 64)

        locations = {
            "base": os.path.join(mounts.mnt_session, "pool"),
            "snapshot": os.path.join(mounts.mnt_session, "snapdir"),
            "staged": os.path.join(mounts.mnt_session, "stagedir"),
        }
        for location, d in locations.items():
            for rep in range(reps):
                rows.add("stat", location, rep, _time_stat(d, n_files, iterations), "us/op")
                rows.add("readdir", location, rep, _time_readdir(d, iterations // 50), "us/op")
                rows.add("rename", location, rep, _time_rename(d, iterations // 10), "us/op")
            for rep in range(reps):
                scratch = os.path.join(d, "scratch")
                os.makedirs(scratch, exist_ok=True)
                n = max(iterations // 10, 10)
                rows.add("create", location, rep, _time_create(scratch, n), "us/op")
                rows.add("unlink", location, rep, _time_unlink(scratch, n), "us/op")
                os.rmdir(scratch)

        # permission engine overhead on stat: same bridge, enforcement off
        ses.enforce = False
        for rep in range(reps):
            rows.add(
                "stat-no-permission", "base", rep,
                _time_stat(locations["base"], n_files, iterations), "us/op",
            )
        ses.enforce = True
        if tree_digest(mounts.base_session) != digest_before:
            raise AssertionError("meta suite mutated the base tree")
    finally:
        mounts.close()
    rows.summarize(out)
    return rows


def _time_stat(d, n_files, iters):
    paths = [os.path.join(d, f"f{i % n_files}") for i in range(iters)]
    t0 = time.perf_counter()
    for p in paths:
        os.stat(p)
    return (time.perf_counter() - t0) / iters * 1e6


def _time_readdir(d, iters):
    t0 = time.perf_counter()
    for _ in range(max(iters, 1)):
        os.listdir(d)
    return (time.perf_counter() - t0) / max(iters, 1) * 1e6


def _time_rename(d, iters):
    a, b = os.path.join(d, "f0"), os.path.join(d, "f0.renamed")
    t0 = time.perf_counter()
    for _ in range(max(iters // 2, 1)):
        os.rename(a, b)
        os.rename(b, a)
    return (time.perf_counter() - t0) / max(iters // 2 * 2, 1) * 1e6


def _time_create(d, n):
    t0 = time.perf_counter()
    for i in range(n):
        fd = os.open(os.path.join(d, f"c{i}"), os.O_CREAT | os.O_WRONLY, 0o644)
        os.close(fd)
    return (time.perf_counter() - t0) / n * 1e6


def _time_unlink(d, n):
    t0 = time.perf_counter()
    for i in range(n):
        os.unlink(os.path.join(d, f"c{i}"))
    return (time.perf_counter() - t0) / n * 1e6


# ----------------------------------------------------------------------
# snapshot sweep


def snap_suite(workdir, max_k=512, probe_iters=200, seed=7, out=sys.stdout):
    rows = Rows("snap")
    overwrite_set = 10

    def populate(base):
        d = os.path.join(base, "work")
        os.makedirs(d)
        for i in range(overwrite_set):
            with open(os.path.join(d, f"w{i}"), "wb") as f:
                f.write(b"0" * 256)
        with open(os.path.join(base, "untouched"), "wb") as f:
            f.write(b"u" * 4096)

    mounts = _Mounts(workdir, populate)
    try:
        digest_before = tree_digest(mounts.base_session)
        mnt = mounts.mnt_session
        ses = mounts.session
        ks = []
        k = 1
        while k <= max_k:
            ks.append(k)
            k *= 2
        done = 0
        for k in ks:
            while done < k:
                for i in range(overwrite_set):
                    with open(os.path.join(mnt, "work", f"w{i}"), "wb") as f:
                        f.write(f"gen{done}".encode())
                ses.snapshot(f"s{done}")
                done += 1
            scratch = os.path.join(mnt, f"probe{k}")
            os.makedirs(scratch)
            for rep in range(5):
                rows.add(f"create-new@k", str(k), rep,
                         _time_create(scratch, probe_iters), "us/op")
                for i in range(probe_iters):
                    os.unlink(os.path.join(scratch, f"c{i}"))
                t0 = time.perf_counter()
                for _ in range(probe_iters):
                    with open(os.path.join(mnt, "untouched"), "rb") as f:
                        f.read(4096)
                rows.add(f"read-untouched@k", str(k), rep,
                         (time.perf_counter() - t0) / probe_iters * 1e6, "us/op")
            os.rmdir(scratch)
        if tree_digest(mounts.base_session) != digest_before:
            raise AssertionError("snap suite mutated the base tree")
    finally:
        mounts.close()
    rows.summarize(out)
    for probe in ("create-new@k", "read-untouched@k"):
        r = snap_ratio(rows, probe, ks[0], ks[-1])
        print(f"  {probe}: k={ks[-1]} vs k={ks[0]} ratio {r:.3f}", file=out)
    return rows


def snap_ratio(rows, probe, k_low, k_high):
    cells = rows.cells()
    low = statistics.median(cells[(probe, str(k_low), "us/op")])
    high = statistics.median(cells[(probe, str(k_high), "us/op")])
    return high / low


# ----------------------------------------------------------------------
# commit cost


def commit_suite(workdir, record_counts=(1000, 2000, 5000, 10000, 20000, 50000, 100000),
                 reps=3, seed=7, out=sys.stdout):
    rows = Rows("commit")
    for n in record_counts:
        for rep in range(reps):
            base = os.path.join(workdir, f"commit-{n}-{rep}")
            os.makedirs(base)
            ses = MountSession(base, rules=RuleTree([("/", "allow")]))
            try:
                for i in range(n):
                    h = ses.open(f"f{i:06d}", write=True, create=True)
                    ses.write(h, b"payload\n", 0)
                    ses.release(h)
                t0 = time.perf_counter()
                summary = ses.commit()
                dt = time.perf_counter() - t0
                assert summary.applied == n
                rows.add("commit-time", str(n), rep, dt * 1000, "ms")
            finally:
                ses.close()
            shutil.rmtree(base)
    rows.summarize(out)
    slope, intercept, r2 = commit_fit(rows)
    print(f"  linear fit: {slope*1000:.3f} us/record + {intercept:.2f} ms, r^2 = {r2:.5f}", file=out)
    return rows


def commit_fit(rows):
    cells = rows.cells()
    points = []
    for (param, loc, unit), vals in cells.items():
        if param == "commit-time":
            points.append((int(loc), statistics.median(vals)))
    points.sort()
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    r2 = 1.0 - ss_res / ss_tot if ss_tot else 1.0
    return slope, intercept, r2


# ----------------------------------------------------------------------
# compiled core vs pure fallback


def core_suite(iters=200_000, out=sys.stdout):
    from yolofs import _pure
    from yolofs.tree import OverrideTree

    rows = Rows("core")
    impls = [("pure", _pure)]
    try:
        from yolofs import _core  # type: ignore

        impls.append(("compiled", _core))
    except ImportError:
        print("  compiled core unavailable; benchmarking the fallback only", file=out)

    tree = OverrideTree()
    tree.apply(("S", "a/b/c/leaf", 1), 0)
    tree.apply(("R", "a/b", "moved"), 0)
    parts = ("moved", "c", "leaf")
    rules = {"state": None, "kids": {"a": {"state": "allow", "kids": {
        "b": {"state": "deny", "kids": {}}}}}}
    rparts = ("a", "b", "c")
    record = ("S", "some/long/path/to/file", 123456)

    for name, impl in impls:
        for rep in range(5):
            t0 = time.perf_counter()
            for _ in range(iters):
                impl.resolve(tree.root, parts)
            rows.add("resolve", name, rep, iters / (time.perf_counter() - t0), "op/s")
            t0 = time.perf_counter()
            for _ in range(iters):
                impl.rule_effective(rules, rparts)
            rows.add("rule-effective", name, rep, iters / (time.perf_counter() - t0), "op/s")
            t0 = time.perf_counter()
            for _ in range(iters):
                impl.encode_record(record)
            rows.add("encode-record", name, rep, iters / (time.perf_counter() - t0), "op/s")
            t0 = time.perf_counter()
            for _ in range(iters):
                impl.norm_parts("a/b/c/d/e")
            rows.add("norm-parts", name, rep, iters / (time.perf_counter() - t0), "op/s")
    rows.summarize(out)
    cells = rows.cells()
    if len(impls) == 2:
        for op in ("resolve", "rule-effective", "encode-record", "norm-parts"):
            speedup = statistics.median(
                cells[(op, "compiled", "op/s")]
            ) / statistics.median(cells[(op, "pure", "op/s")])
            print(f"  {op:<16} compiled/pure speedup {speedup:.2f}x", file=out)
    return rows


# ----------------------------------------------------------------------


def run_suite(args):
    workdir = args.workdir or default_workdir()
    os.makedirs(workdir, exist_ok=True)
    scratch = tempfile.mkdtemp(prefix=f"{args.suite}-", dir=workdir)
    try:
        if args.suite == "io":
            rows = io_suite(
                scratch,
                file_mb=64 if args.quick else 1024,
                reps=3 if args.quick else 5,
                seed=args.seed,
            )
        elif args.suite == "meta":
            rows = meta_suite(
                scratch,
                iterations=500 if args.quick else 10000,
                reps=3 if args.quick else 5,
                seed=args.seed,
            )
        elif args.suite == "snap":
            rows = snap_suite(
                scratch,
                max_k=8 if args.quick else 512,
                probe_iters=50 if args.quick else 200,
                seed=args.seed,
            )
        elif args.suite == "commit":
            rows = commit_suite(
                scratch,
                record_counts=(200, 500, 1000) if args.quick else
                (1000, 2000, 5000, 10000, 20000, 50000, 100000),
                reps=2 if args.quick else 3,
                seed=args.seed,
            )
        elif args.suite == "core":
            rows = core_suite(iters=20_000 if args.quick else 200_000)
        else:
            print(f"unknown suite {args.suite}", file=sys.stderr)
            return 2
        if args.csv:
            rows.write_csv(args.csv)
            print(f"raw samples written to {args.csv}")
        return 0
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
        if not args.workdir:
            shutil.rmtree(workdir, ignore_errors=True)
