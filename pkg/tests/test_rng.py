import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from widthsde import rng

U = np.uint64

# Known-answer vectors for Philox4x32-10 from the Random123 distribution
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers(ctr, key, expected):
    out = rng.philox4x32(*(U(c) for c in ctr), *(U(k) for k in key))
    assert tuple(int(w) for w in out) == expected


def test_draws_are_addressed_not_sequential():
    a = rng.normals(7, [0, 1, 2], 0, 50)
    b = rng.normals(7, [2], 10, 5)
    assert np.array_equal(a[2, 10:15], b[0])


def test_streams_seeds_and_paths_differ():
    base = rng.normals(1, [0], 0, 64)
    for other in (rng.normals(2, [0], 0, 64), rng.normals(1, [1], 0, 64), rng.normals(1, [0], 0, 64, stream=1)):
        assert not np.allclose(base, other)


def test_moments_of_normals():
    z = rng.normals(3, np.arange(200), 0, 500).ravel()
    n = z.size
    assert abs(z.mean()) < 4 / np.sqrt(n)
    assert abs(z.var() - 1) < 4 * np.sqrt(2 / n)
    # fourth moment of a standard normal is 3
    assert abs(np.mean(z**4) - 3) < 4 * np.sqrt(96 / n)


def test_lag_one_correlation_small():
    z = rng.normals(11, [5], 0, 100_000)[0]
    r = np.corrcoef(z[:-1], z[1:])[0, 1]
    assert abs(r) < 4 / np.sqrt(len(z))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**48 - 1), st.integers(0, 2**40))
def test_gauss_deterministic_and_finite(seed, path, step):
    a = rng.gauss(U(seed), U(path), U(step), 0)
    b = rng.gauss(U(seed), U(path), U(step), 0)
    assert a == b and np.isfinite(a)


def test_fingerprint_distinguishes_paths():
    prints = {rng.fingerprint(0, i) for i in range(1000)}
    assert len(prints) == 1000
