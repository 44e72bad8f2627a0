import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    lines = []
    for crit in sorted(mod.REPORT):
        parts = mod.REPORT[crit]
        ok = all(v[0] for v in parts.values())
        lines.append(f"criterion {crit}: {'PASS' if ok else 'FAIL'} | " + "; ".join(v[1] for v in parts.values()))
    for line in lines:
        terminalreporter.write_line(line)
    if len(mod.REPORT) == 8:
        out = mod.RESULTS / "criteria.txt"
        out.write_text("\n".join(lines) + "\n")
