import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from abl_lab.randomstream import RandomStream, stream, uniforms

u64 = st.integers(0, 2**63 - 1)


@given(u64, u64, st.integers(0, 1000))
def test_open_unit_interval_and_pure_function(seed, trial, counter):
    a = float(uniforms(seed, trial, counter))
    assert 0.0 < a < 1.0
    assert a == float(uniforms(seed, trial, counter))


def test_stream_matches_keyed_draws():
    rs = stream(42, 17)
    drawn = [rs.uniform() for _ in range(5)]
    np.testing.assert_array_equal(drawn, uniforms(42, 17, np.arange(5)))
    assert rs.counter == 5


def test_vectorised_matches_scalar():
    idx = np.arange(100)
    vec = uniforms(3, idx, 2)
    assert [float(uniforms(3, int(i), 2)) for i in idx] == vec.tolist()


def test_distinct_keys_give_distinct_draws():
    base = uniforms(1, np.arange(1000), 0)
    assert len(np.unique(base)) == 1000
    assert not np.array_equal(base, uniforms(2, np.arange(1000), 0))
    assert not np.array_equal(base, uniforms(1, np.arange(1000), 1))


def test_roughly_uniform():
    u = uniforms(0, np.arange(200_000), 0)
    assert abs(u.mean() - 0.5) < 0.005
    hist, _ = np.histogram(u, bins=10, range=(0, 1))
    assert np.all(np.abs(hist / 20_000 - 1) < 0.05)


def test_random_stream_start_counter():
    rs = RandomStream(9, 4, counter=3)
    assert rs.uniform() == float(uniforms(9, 4, 3))
