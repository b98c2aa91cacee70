"""Counter-based hashing used for lazily sampled fields and walk randomness.

Everything here is a pure function of its integer inputs, so the same
(seed, key) pair always maps to the same 64-bit word no matter the query
order, process or thread.  The numba versions and the numpy versions must
stay bit-identical; ``tests/test_env.py`` checks this.
"""
import numba as nb
import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def mix64(z):
    # splitmix64 finalizer
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def absorb(h, value):
    return mix64(h ^ (np.uint64(value) + _GOLDEN))


@nb.njit(cache=True, inline="always")
def to_unit(h):
    """Map a 64-bit word to a double in [0, 1)."""
    return np.float64(h >> _S11) * _INV53


def seed_key(seed):
    """Scramble a user seed into a 64-bit key (python int in, np.uint64 out)."""
    return np.uint64(mix64(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) ^ _GOLDEN))


def absorb_array(h, values):
    """Vectorized :func:`absorb`; ``h`` may be a scalar or an array."""
    with np.errstate(over="ignore"):
        v = np.asarray(values).astype(np.int64).view(np.uint64) + _GOLDEN
        z = np.asarray(h, dtype=np.uint64) ^ v
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def unit_array(h):
    return (np.asarray(h, dtype=np.uint64) >> _S11).astype(np.float64) * _INV53


def derived_seed(base, index):
    """Independent child seed number ``index`` of ``base`` (as a python int).

    Child seeds of distinct bases never collide in practice, so disjoint
    macro-replicates are just distinct bases.
    """
    h = absorb_array(seed_key(base), np.array([index]))[0]
    return int(h >> np.uint64(1))
