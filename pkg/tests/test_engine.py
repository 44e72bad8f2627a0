import numpy as np
from numba import njit

from repcat import engine
from repcat.montecarlo import seed_stream

GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def splitmix(state: np.uint64, n: int) -> np.ndarray:
    """Independent numpy SplitMix64: the first ``n`` outputs after ``state``."""
    with np.errstate(over="ignore"):
        s = state + GOLDEN * np.arange(1, n + 1, dtype=np.uint64)
        s = (s ^ (s >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        s = (s ^ (s >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return s ^ (s >> np.uint64(31))


@njit
def draws(state, b, n):
    out = np.empty(n)
    for j in range(n):
        out[j] = engine._uniform(state, b)
    return out


def test_engine_stream_matches_reference_splitmix():
    st = engine.seed_states(np.uint64(42), np.arange(3, dtype=np.int64))
    ref = splitmix(st[1], 1000)
    got = draws(st.copy(), 1, 1000)
    assert np.array_equal(got, (ref >> np.uint64(11)) * (1.0 / 2 ** 53))


def test_same_seed_same_stream():
    a = engine.seed_states(np.uint64(7), np.array([0, 5, 9], np.int64))
    b = engine.seed_states(np.uint64(7), np.array([9, 5], np.int64))
    assert a[2] == b[0] and a[1] == b[1]
    assert not np.array_equal(engine.seed_states(np.uint64(8), np.array([0], np.int64)), a[:1])
    assert np.array_equal(seed_stream(3, 4).random(5), seed_stream(3, 4).random(5))


def test_neighbouring_streams_are_uncorrelated():
    st = engine.seed_states(np.uint64(2024), np.array([0, 1], np.int64))
    x = draws(st.copy(), 0, 10 ** 6)
    y = draws(st.copy(), 1, 10 ** 6)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.01
    assert abs(x.mean() - 0.5) < 0.002
