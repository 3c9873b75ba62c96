"""Counter-based random stream (splitmix64 finalizer).

Every random number in a trajectory is a pure function of
``(trajectory_seed, step_index, draw_index)``, so trajectories are
reproducible regardless of execution order, and parallel workers need no
shared stream state.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_DRAW_SALT = np.uint64(0x632BE59BD9B4E019)
_TRAJ_SALT = np.uint64(0x8530AD1E9E3779B9)
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True)
def mix64(z):
    """splitmix64 finalizer: one 64-bit avalanche round."""
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def counter_uniform(seed, step, draw):
    """Uniform double in [0, 1) keyed by (seed, step, draw)."""
    x = mix64(seed ^ mix64(step ^ mix64(draw + _DRAW_SALT)))
    return (x >> np.uint64(11)) * _INV_2_53


def uniform(seed, step, draw):
    """Python-facing wrapper; coerces arguments to uint64 first."""
    return counter_uniform(np.uint64(seed), np.uint64(step), np.uint64(draw))


def spawn_seed(base_seed, index):
    """Derive a per-trajectory seed from an ensemble base seed."""
    base = np.uint64(base_seed)
    idx = np.uint64(index)
    return int(mix64(base ^ mix64(idx + _TRAJ_SALT)))
