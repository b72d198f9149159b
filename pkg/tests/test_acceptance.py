"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured values and
their bounds. Run ``python tests/test_acceptance.py`` for the lines alone.
"""

import sys
import time

import pytest

from fiberlab.suites import SuiteContext, run_suite

CRITERIA = [
    (1, "exact transport matches the integer coupling oracle", "exact-ot"),
    (2, "metric scalar product is a per-fiber sum", "scalar-product"),
    (3, "gamma orthogonality equivalence", "gamma-orthogonality"),
    (4, "projection identities", "projection"),
    (5, "midpoint doubling contraction", "doubling"),
    (6, "Chebyshev concentration bound", "chebyshev"),
    (7, "segment normal splitting", "segment"),
    (8, "square boundary field is solenoidal", "square-solenoidal"),
    (9, "three-part decomposition fixture", "decomp"),
    (10, "max-min equals min-max equals component mass", "maxmin"),
    (11, "plan extension and truncation", "appendix"),
    (12, "blow-up tube mass", "blowup"),
    (13, "closedness regressions", "closedness"),
]


def evaluate(number, title, suite):
    start = time.perf_counter()
    report = run_suite(suite, SuiteContext(seed=number))
    elapsed = time.perf_counter() - start
    detail = "; ".join(
        f"{c.name} {c.value:.3g} {c.relation} {c.bound:.3g}" + ("" if c.passed else " [violated]")
        for c in report.checks
    )
    verdict = "PASS" if report.passed else "FAIL"
    return report, f"{verdict} criterion {number:>2} ({title}, {elapsed:.1f}s): {detail}"


@pytest.mark.parametrize("number, title, suite", CRITERIA, ids=[c[2] for c in CRITERIA])
def test_criterion(number, title, suite, capsys):
    report, line = evaluate(number, title, suite)
    with capsys.disabled():
        print("\n" + line)
    if not report.passed:
        pytest.fail("\n".join(c.line() for c in report.checks if not c.passed), pytrace=False)


if __name__ == "__main__":
    ok = True
    for crit in CRITERIA:
        report, line = evaluate(*crit)
        print(line)
        ok &= report.passed
    sys.exit(0 if ok else 1)
