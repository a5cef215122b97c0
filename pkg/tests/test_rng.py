import numpy as np

from overdisp.rng import RngStream, splitmix64, stream_key


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    state = 0
    out = []
    for _ in range(3):
        out.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_streams_are_reproducible_and_distinct():
    a = RngStream(42, 7, 3)
    b = RngStream(42, 7, 3)
    xa = [a.uniform() for _ in range(600)]
    xb = [b.uniform() for _ in range(600)]
    assert xa == xb
    keys = {stream_key(42, c, r) for c in range(20) for r in range(50)}
    assert len(keys) == 1000


def test_uniform_range_and_normal_moments():
    rng = RngStream(1)
    u = np.array([rng.uniform() for _ in range(100000)])
    assert u.min() > 0.0 and u.max() <= 1.0
    z = np.array([rng.normal() for _ in range(200000)])
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1) < 0.01
