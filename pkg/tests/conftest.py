import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cdlcal.transcript import Grid, Transcript, profile_from_buckets

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def grid_profiles(draw, max_m=12, max_n=30):
    """Grid bucket profiles with at least one nonempty bucket."""
    m = draw(st.integers(2, max_m))
    counts = draw(st.lists(st.integers(0, max_n), min_size=m, max_size=m))
    if sum(counts) == 0:
        counts[draw(st.integers(0, m - 1))] = 1
    ones = [draw(st.integers(0, n)) for n in counts]
    grid = Grid(m)
    return profile_from_buckets(grid.values, counts, ones, grid)


@st.composite
def transcripts(draw, max_T=60):
    T = draw(st.integers(1, max_T))
    m = draw(st.integers(2, 12))
    idx = draw(st.lists(st.integers(1, m), min_size=T, max_size=T))
    states = draw(st.lists(st.integers(0, 1), min_size=T, max_size=T))
    return Transcript(np.array(idx) / m, np.array(states))


def random_grid_transcript(rng, T_max=200, m_max=12):
    """Uniform grid predictions with Bernoulli states at a random mean per bucket."""
    T = int(rng.integers(1, T_max + 1))
    m = int(rng.integers(2, m_max + 1))
    idx = rng.integers(1, m + 1, size=T)
    means = rng.random(m)
    states = (rng.random(T) < means[idx - 1]).astype(np.int64)
    return Transcript(idx / m, states), Grid(m)


ACCEPTANCE_LINES = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
