"""Counter-stream RNG: reference arithmetic, range, and stream independence."""

import numpy as np
import pytest

from eqstop import _rng

MASK = (1 << 64) - 1


def splitmix_reference(z: int) -> int:
    """SplitMix64 finalizer in plain Python integer arithmetic."""
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return (z ^ (z >> 31)) & MASK


@pytest.mark.parametrize("z", [0, 1, 0xDEADBEEF, (1 << 64) - 1, 0x9E3779B97F4A7C15])
def test_mix64_matches_reference(z):
    assert int(_rng.mix64(np.uint64(z))) == splitmix_reference(z)


def test_uniforms_open_interval():
    base = _rng.stream_base(123, np.arange(1000, dtype=np.uint64))
    u = _rng.uniform_at(base, np.zeros(1000, dtype=np.uint64))
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_uniform_mean_and_flip():
    base = _rng.stream_base(7, 0)
    ks = np.arange(200_000, dtype=np.uint64)
    u = _rng.uniform_at(base, ks)
    assert abs(u.mean() - 0.5) < 3.0 * (1.0 / np.sqrt(12 * len(ks)))
    flipped = _rng.uniform_at(base, ks, flip=np.ones(len(ks), dtype=bool))
    np.testing.assert_allclose(flipped, 1.0 - u, rtol=0, atol=0)


def test_streams_are_reproducible_and_distinct():
    a1 = _rng.uniform_at(_rng.stream_base(1, 5), np.arange(10, dtype=np.uint64))
    a2 = _rng.uniform_at(_rng.stream_base(1, 5), np.arange(10, dtype=np.uint64))
    b = _rng.uniform_at(_rng.stream_base(1, 6), np.arange(10, dtype=np.uint64))
    c = _rng.uniform_at(_rng.stream_base(2, 5), np.arange(10, dtype=np.uint64))
    np.testing.assert_array_equal(a1, a2)
    assert not np.any(a1 == b)
    assert not np.any(a1 == c)


def test_normal_matches_scipy_inverse_cdf():
    from scipy.special import ndtri

    base = _rng.stream_base(11, 3)
    ks = np.arange(100, dtype=np.uint64)
    u = _rng.uniform_at(base, ks)
    np.testing.assert_array_equal(_rng.normal_at(base, ks), ndtri(u))
