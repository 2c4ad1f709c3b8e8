"""Shared pytest hooks.

Acceptance criteria print one PASS/FAIL line each so a suite run doubles
as the acceptance report.
"""


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {status}", flush=True)
