import numpy as np
import pytest
from hypothesis import strategies as st

from bahc import ScatterInput


def random_spd(rng, d, df=None):
    """Wishart-like SPD matrix with a spread of scales."""
    df = d + 3 if df is None else df
    a = rng.standard_normal((df, d)) * rng.uniform(0.3, 3.0, size=d)
    return a.T @ a


def random_scatter(rng, d, n=None, kind="cov"):
    n = int(rng.integers(d + 2, 60)) if n is None else n
    x = rng.standard_normal((n, d)) @ np.linalg.cholesky(random_spd(rng, d)).T
    s = ScatterInput(np.cov(x.T, bias=True) * n if d > 1 else np.atleast_2d(np.var(x) * n), n, mean_known=True)
    return s.to_correlation() if kind == "corr" else s


def random_pair(rng, d):
    """Two disjoint non-empty clusters drawn from range(d)."""
    perm = rng.permutation(d)
    size = int(rng.integers(2, d + 1))
    cut = int(rng.integers(1, size))
    return tuple(sorted(perm[:cut].tolist())), tuple(sorted(perm[cut:size].tolist()))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed at the end of the run
CRITERIA: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
