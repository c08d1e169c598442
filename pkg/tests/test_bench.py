"""Benchmark harness smoke tests: quick parameters, stable CSV schema,
reproducible parameter sets under a fixed seed."""

import csv
import io
import os

import pytest

from yolofs import bench, fusebridge


def kernel_mounts_available():
    return fusebridge.fuse_available()


@pytest.fixture
def workdir(tmp_path):
    return str(tmp_path)


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


class TestCsvSchema:
    def test_commit_quick(self, workdir, tmp_path):
        out = io.StringIO()
        rows = bench.commit_suite(
            workdir, record_counts=(50, 100, 200), reps=2, out=out
        )
        csv_path = tmp_path / "commit.csv"
        rows.write_csv(csv_path)
        data = read_csv(csv_path)
        assert data, "no samples"
        assert set(data[0]) == {"suite", "param", "location", "rep", "value", "unit"}
        assert {r["suite"] for r in data} == {"commit"}
        slope, intercept, r2 = bench.commit_fit(rows)
        assert slope > 0

    def test_core_suite_runs(self):
        out = io.StringIO()
        rows = bench.core_suite(iters=2000, out=out)
        cells = rows.cells()
        assert ("resolve", "pure", "op/s") in cells
        assert all(v > 0 for v in cells[("resolve", "pure", "op/s")])


@pytest.mark.skipif(not kernel_mounts_available(), reason="/dev/fuse missing")
class TestMountSuites:
    def test_io_quick(self, workdir):
        out = io.StringIO()
        rows = bench.io_suite(workdir, file_mb=4, reps=2, out=out)
        ratios = bench.io_ratios(rows)
        assert set(ratios) == {
            "seq-read-4k-4m", "rand-read-4k-4m", "seq-write-4k-4m", "rand-write-4k-4m",
        }
        for pattern, ratio in ratios.items():
            assert ratio > 0.2, (pattern, ratio)

    def test_meta_quick(self, workdir):
        out = io.StringIO()
        rows = bench.meta_suite(workdir, iterations=120, reps=2, out=out)
        cells = rows.cells()
        for op in ("create", "stat", "readdir", "rename", "unlink"):
            for loc in ("base", "snapshot", "staged"):
                assert (op, loc, "us/op") in cells, (op, loc)
        assert ("stat-no-permission", "base", "us/op") in cells

    def test_snap_quick(self, workdir):
        out = io.StringIO()
        rows = bench.snap_suite(workdir, max_k=4, probe_iters=30, out=out)
        assert bench.snap_ratio(rows, "create-new@k", 1, 4) > 0
        assert bench.snap_ratio(rows, "read-untouched@k", 1, 4) > 0
