import re
from collections import defaultdict

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+?)(?:\[|$)")
_results = defaultdict(list)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        details = [v for k, v in report.user_properties if k == "detail"]
        reason = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            reason = report.longrepr[2].removeprefix("Skipped: ")
        _results[int(m.group(1))].append((m.group(2), report.outcome, details, reason))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        rows = _results[num]
        name = rows[0][0]
        outcomes = [r[1] for r in rows]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        notes = [d for r in rows for d in r[2]]
        skipped = sorted({r[3] for r in rows if r[1] == "skipped"})
        if skipped:
            notes.append(f"{outcomes.count('skipped')} skipped: " + "; ".join(skipped))
        line = f"criterion {num} {name}: {verdict}"
        if notes:
            line += " | " + "; ".join(notes)
        terminalreporter.write_line(line)
