"""Counter-based random normals keyed by (seed, path, coordinate, step).

A splitmix-style 64-bit mixer is applied to the key tuple; two mixed words
feed a Box-Muller transform.  Draws are pure functions of the key, so
simulations are deterministic and order-independent regardless of thread
scheduling, and permuting path indices permutes trajectories.

The scalar njit functions are consumed by the simulation kernels; the numpy
versions produce bit-identical values and back the slow generic-drift path
and the test suite.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

U64 = np.uint64
_MASK = U64(0xFFFFFFFFFFFFFFFF)
_GAMMA = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_STREAM_A = U64(0xD1B54A32D192ED03)
_STREAM_B = U64(0x8CB92BA72F3D8DD7)
_INV53 = 1.1102230246251565e-16  # 2**-53
_TWO_PI = 6.283185307179586


@njit(inline="always", cache=True)
def mix64(z):
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> U64(30))) * _M1) & _MASK
    z = ((z ^ (z >> U64(27))) * _M2) & _MASK
    return z ^ (z >> U64(31))


@njit(inline="always", cache=True)
def counter_normal(seed, pid, coord, step):
    """One standard normal for the key (seed, path, coordinate, step)."""
    k = mix64(U64(seed) ^ mix64(U64(pid) ^ mix64(U64(coord) ^ mix64(U64(step)))))
    a = mix64(k ^ _STREAM_A)
    b = mix64(k ^ _STREAM_B)
    u1 = ((a >> U64(11)) + U64(1)) * _INV53  # in (0, 1]
    u2 = (b >> U64(11)) * _INV53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z + _GAMMA) & _MASK
    z = ((z ^ (z >> U64(30))) * _M1) & _MASK
    z = ((z ^ (z >> U64(27))) * _M2) & _MASK
    return z ^ (z >> U64(31))


def counter_normals(seed, pid, coord, step) -> np.ndarray:
    """Vectorized counterpart of :func:`counter_normal` (broadcasts inputs)."""
    with np.errstate(over="ignore"):
        pid, coord, step = np.broadcast_arrays(
            np.asarray(pid, dtype=np.uint64),
            np.asarray(coord, dtype=np.uint64),
            np.asarray(step, dtype=np.uint64),
        )
        k = _mix64_np(U64(seed) ^ _mix64_np(pid ^ _mix64_np(coord ^ _mix64_np(step))))
        a = _mix64_np(k ^ _STREAM_A)
        b = _mix64_np(k ^ _STREAM_B)
    u1 = ((a >> U64(11)).astype(np.float64) + 1.0) * _INV53
    u2 = (b >> U64(11)).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)
