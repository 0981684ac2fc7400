import numpy as np
import pytest
from hypothesis import strategies as st

from trajshield.data import Dataset, Trajectory, TrajectoryPoint


def random_corpus(rng: np.random.Generator, n: int, n_users: int = 4, n_categories: int = 5,
                  max_len: int = 12, start_tid: int = 0) -> list[Trajectory]:
    out = []
    for i in range(n):
        k = int(rng.integers(1, max_len + 1))
        pts = tuple(TrajectoryPoint(float(40.7 + rng.normal(0, 0.05)), float(-74.0 + rng.normal(0, 0.05)),
                                    int(rng.integers(7)), int(rng.integers(24)), int(rng.integers(n_categories)))
                    for _ in range(k))
        out.append(Trajectory(start_tid + i, int(rng.integers(n_users)), pts))
    return out


def make_dataset(n=20, seed=0, n_categories=5, **kw) -> Dataset:
    rng = np.random.default_rng(seed)
    vocab = tuple(f"cat{i}" for i in range(n_categories))
    return Dataset(tuple(random_corpus(rng, n, n_categories=n_categories, **kw)), vocab)


@pytest.fixture
def small_dataset():
    return make_dataset()


points = st.builds(
    TrajectoryPoint,
    lat=st.floats(40.5, 41.0),
    lon=st.floats(-74.3, -73.6),
    day=st.integers(0, 6),
    hour=st.integers(0, 23),
    category=st.integers(0, 4),
)


@st.composite
def trajectories(draw, tid=None, max_len=10):
    pts = draw(st.lists(points, min_size=1, max_size=max_len))
    return Trajectory(draw(st.integers(0, 10_000)) if tid is None else tid,
                      draw(st.integers(0, 50)), tuple(pts))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
