from fractions import Fraction

import numpy as np
import pytest

from hmod.nilpotent_core import DFPoint, HPoint, df_dim


def rand_frac(rng, lo=-6, hi=6, den=4):
    return Fraction(int(rng.integers(lo * den, hi * den + 1)), int(rng.integers(1, den + 1)))


def rand_h(rng, n):
    return HPoint([rand_frac(rng) for _ in range(2 * n + 1)])


def rand_df(rng, n):
    return DFPoint([rand_frac(rng) for _ in range(df_dim(n))])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, one-line detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
