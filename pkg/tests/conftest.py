import re
from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()
_NAME = re.compile(r"test_c(\d+)[a-z]?_")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    m = _NAME.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    entry = _CRITERIA.setdefault(num, {"ok": True, "details": []})
    entry["ok"] &= report.outcome == "passed"
    props = dict(report.user_properties)
    detail = props.get("detail")
    if detail:
        entry["details"].append(detail)
    if report.outcome != "passed" and not detail:
        entry["details"].append(report.nodeid.split("::")[-1] + " failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        status = "PASS" if entry["ok"] else "FAIL"
        tr.write_line(f"criterion {num:2d}: {status}  " + "; ".join(entry["details"]))


@pytest.fixture
def detail(record_property):
    """Attach a one-line measurement summary to the criterion report."""
    def put(text):
        record_property("detail", text)
    return put
