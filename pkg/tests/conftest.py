import re

import pytest

# criterion label -> (name, passed, tolerance, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}
# safety bookkeeping shared by criteria 2-8 and checked by criterion 9
SAFETY = {"runs": 0, "violations": []}


def record(label: str, name: str, passed: bool, tolerance: str, detail: str = "") -> None:
    ACCEPTANCE[str(label)] = (name, bool(passed), tolerance, detail)


def _order(label: str) -> tuple:
    m = re.match(r"(\d+)(.*)", label)
    return (int(m.group(1)), m.group(2))


def note_safety(label: str, safety_ok: bool) -> None:
    SAFETY["runs"] += 1
    if not safety_ok:
        SAFETY["violations"].append(label)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=_order):
        name, passed, tol, detail = ACCEPTANCE[label]
        line = f"{'PASS' if passed else 'FAIL'} {label:>3}. {name} [tolerance: {tol}]"
        if detail:
            line += f" :: {detail}"
        tr.write_line(line)


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
