import numpy as np
import pytest

from finineq.identification import scheme
from finineq.synthetic import DgpSpec, make_sign_separated_impact, random_lag_matrices


def baseline_dgp(seed=0, N=16, T=72, p=4, radius=0.6, column_scale=None):
    """Five-variable sign-separated DGP used across modules."""
    sch = scheme("baseline")
    rng = np.random.default_rng(seed)
    impact = make_sign_separated_impact(sch, 0.2, seed=rng.integers(2**32), column_scale=column_scale)
    mats = random_lag_matrices(sch.K, p, rng, radius)
    intercepts = rng.normal(0.0, 1.0, (N, sch.K))
    return DgpSpec(mats, impact, N, T, intercepts, int(rng.integers(2**32)), sch.variables,
                   sch.shocks)


@pytest.fixture
def dgp():
    return baseline_dgp(seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append(f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
