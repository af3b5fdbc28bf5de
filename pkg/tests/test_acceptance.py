"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line with the measured numbers. Run
``python tests/test_acceptance.py`` for the same lines without pytest.
"""
import sys

import pytest

from compbf.validation import CHECKS, run_check


@pytest.mark.parametrize("name", list(CHECKS))
def test_acceptance(name, capsys):
    res = run_check(name)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, res.detail


if __name__ == "__main__":
    failed = 0
    for name in CHECKS:
        res = run_check(name)
        print(res.line(), flush=True)
        failed += not res.passed
    sys.exit(1 if failed else 0)
