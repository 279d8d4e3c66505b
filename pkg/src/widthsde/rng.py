"""Counter-based Gaussian draws keyed by (seed, path, step, stream).

Philox4x32-10 (the Random123 family) turns a 128-bit counter and a
64-bit key into four independent 32-bit words.  Every random number used by
the integrators is addressed by its coordinates instead of by position in a
shared stream, so ensembles can be split across workers in any order and
still reproduce bit for bit.

Counter layout: (step_lo, step_hi, path_lo, (path_hi & 0xffff) << 16 | stream).
Key: (seed_lo, seed_hi).
"""

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

# 2**-32, and an offset keeping uniforms inside the open interval (0, 1)
_INV32 = 1.0 / 4294967296.0
_HALF32 = 0.5 / 4294967296.0

STREAM_EM = 0
STREAM_OU = 1
STREAM_GENERATOR = 2


@njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds.  All arguments are uint64 holding 32-bit values."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT
        lo0 = p0 & _MASK
        hi1 = p1 >> _SHIFT
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK, lo1, (hi0 ^ c3 ^ k1) & _MASK, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True)
def _words(seed, path, step, stream):
    s = np.uint64(seed)
    p = np.uint64(path)
    k = np.uint64(step)
    c3 = (((p >> _SHIFT) & np.uint64(0xFFFF)) << np.uint64(16)) | (np.uint64(stream) & np.uint64(0xFFFF))
    return philox4x32(k & _MASK, k >> _SHIFT, p & _MASK, c3, s & _MASK, s >> _SHIFT)


@njit(cache=True)
def gauss4(seed, path, step, stream):
    """Four independent N(0,1) values via Box-Muller on the Philox words."""
    w0, w1, w2, w3 = _words(seed, path, step, stream)
    u0 = float(w0) * _INV32 + _HALF32
    u1 = float(w1) * _INV32
    u2 = float(w2) * _INV32 + _HALF32
    u3 = float(w3) * _INV32
    r0 = math.sqrt(-2.0 * math.log(u0))
    r1 = math.sqrt(-2.0 * math.log(u2))
    a0 = 2.0 * math.pi * u1
    a1 = 2.0 * math.pi * u3
    return r0 * math.cos(a0), r0 * math.sin(a0), r1 * math.cos(a1), r1 * math.sin(a1)


@njit(cache=True)
def gauss(seed, path, step, stream):
    """A single N(0,1) value; the first lane of :func:`gauss4`."""
    z0, _, _, _ = gauss4(seed, path, step, stream)
    return z0


@njit(cache=True)
def _gauss_block(seed, paths, step0, n_steps, stream, out):
    for i in range(paths.shape[0]):
        for j in range(n_steps):
            out[i, j] = gauss(seed, paths[i], step0 + j, stream)


def normals(seed, paths, step0=0, n_steps=1, stream=STREAM_EM):
    """Array of shape (len(paths), n_steps) with the draw for each (path, step)."""
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    out = np.empty((paths.shape[0], n_steps))
    _gauss_block(np.uint64(seed), paths, np.uint64(step0), n_steps, stream, out)
    return out


def fingerprint(seed, path_index, stream=STREAM_EM):
    """64-bit identifier of a path's generator stream (the words at step 2**63)."""
    w0, w1, _, _ = _words(np.uint64(seed), np.uint64(path_index), np.uint64(1 << 63), stream)
    return int(w0) | (int(w1) << 32)
