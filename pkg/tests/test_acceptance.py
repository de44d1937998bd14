"""Full-scale acceptance suite: one test per criterion, one PASS/FAIL line each."""
import pytest

from kickpolymer.validation import validate

NAMES = {
    1: "exact structural identities",
    2: "zero-potential closed forms",
    3: "expectation of Z",
    4: "shape curvature",
    5: "shear invariance",
    6: "monotonicity suite",
    7: "exponent bounds",
    8: "thermodynamic limit and overlap",
    9: "busemann ratios",
    10: "pullback attraction",
    11: "x - u monotonicity",
    12: "reproducibility across threads",
}


@pytest.fixture(scope="session")
def ledgers():
    return validate(seed=0, threads=1), validate(seed=0, threads=2)


def _report(k, passed, detail=""):
    print(f"\n{'PASS' if passed else 'FAIL'} criterion {k:2d} {NAMES[k]}{detail}")


@pytest.mark.parametrize("k", range(1, 12))
def test_criterion(ledgers, k):
    checks = ledgers[0].for_criterion(k)
    assert checks, f"no checks recorded for criterion {k}"
    for c in checks:
        print("  " + c.line())
    passed = all(c.passed for c in checks)
    _report(k, passed)
    assert passed


def test_criterion_12_reproducible(ledgers):
    a, b = ledgers
    same_json = a.to_json().encode() == b.to_json().encode()
    same_text = a.text().encode() == b.text().encode()
    _report(12, same_json and same_text, f" (json={same_json} text={same_text})")
    assert same_json and same_text
