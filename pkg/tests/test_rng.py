import numpy as np
from hypothesis import given, strategies as st

from rieszchaos.rng import normal_range, normals, philox4x64, seed_key


# [DERIVED] oracle: numpy's Philox4x64-10 bit generator with the same key and counter
@given(seed=st.integers(0, 2**64 - 1), ctr=st.lists(st.integers(0, 2**64 - 1), min_size=4, max_size=4))
def test_block_matches_numpy_philox(seed, ctr):
    bg = np.random.Philox(key=seed, counter=np.array(ctr, dtype=np.uint64))
    # numpy increments the counter before producing a block
    want = bg.random_raw(4)
    c0 = (int(ctr[0]) + 1) % 2**64
    carry = int(ctr[0]) + 1 >= 2**64
    nxt = [c0, (int(ctr[1]) + carry) % 2**64, int(ctr[2]), int(ctr[3])]
    if carry and nxt[1] == 0:
        return
    got = philox4x64(np.array([nxt], dtype=np.uint64), seed_key(seed))[0]
    assert np.array_equal(got, want)


def test_normals_are_addressable():
    a = normals(5, 1, np.array([[0], [3]]), -2, np.arange(-10, 10)[None, :])
    b = normal_range(5, 1, [0, 3], -2, -10, 9)
    assert np.array_equal(a, b)
    c = normals(5, 1, 3, -2, np.array([7]))
    assert c[0] == b[1, 17]


def test_streams_are_independent_and_standard():
    x = normal_range(11, 0, np.arange(4), 0, 0, 24999).ravel()
    y = normal_range(11, 1, np.arange(4), 0, 0, 24999).ravel()
    assert abs(x.mean()) < 4 / np.sqrt(x.size)
    assert abs(x.var() - 1) < 4 * np.sqrt(2 / x.size)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / np.sqrt(x.size)
