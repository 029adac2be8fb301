from __future__ import annotations

import json
import time

import pytest

from eps2.reports import jsonable
from eps2.suites import CRITERIA, SUITES

BUDGET = {1: 10, 2: 120, 3: 10, 4: 60, 5: 120, 6: 180, 7: 120, 8: 120, 9: 60, 10: 60}


def _report(criterion, ok, elapsed, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s / {BUDGET[criterion]} s) {detail}"
    print(line)
    return line


def _canonical(reports) -> bytes:
    return json.dumps(jsonable(reports), sort_keys=True).encode()


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(criterion, capsys):
    t0 = time.perf_counter()
    rep = CRITERIA[criterion](jobs=1, seed=0)
    elapsed = time.perf_counter() - t0
    ok = rep["verdict"] == "PASS" and elapsed < BUDGET[criterion]
    with capsys.disabled():
        _report(criterion, ok, elapsed, f"{rep['title']} measured={json.dumps(jsonable(rep.get('measured')))}")
    assert rep["verdict"] == "PASS"
    assert elapsed < BUDGET[criterion]


def test_criterion_10_determinism(capsys):
    t0 = time.perf_counter()
    checks = {}
    for name in ("akn", "capacity"):
        first = _canonical([fn(jobs=1, seed=3) for fn in SUITES[name]])
        again = _canonical([fn(jobs=1, seed=3) for fn in SUITES[name]])
        parallel = _canonical([fn(jobs=2, seed=3) for fn in SUITES[name]])
        checks[name] = (first == again, first == parallel)
    elapsed = time.perf_counter() - t0
    ok = all(a and b for a, b in checks.values()) and elapsed < BUDGET[10]
    with capsys.disabled():
        _report(10, ok, elapsed, "same-seed rerun and jobs 1 vs 2 " + json.dumps(checks))
    assert all(a for a, _ in checks.values()), "same-seed rerun differs"
    assert all(b for _, b in checks.values()), "worker count changes the report"
    assert elapsed < BUDGET[10]
