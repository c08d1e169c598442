import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if "test_acceptance.py" not in report.nodeid or report.when != "call":
        return
    name = report.nodeid.split("::")[-1].replace("test_", "", 1)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {verdict}: {name} ({report.duration:.2f}s)", flush=True)
