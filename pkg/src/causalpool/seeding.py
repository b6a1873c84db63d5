"""Deterministic seed derivation and a counter-based row hash.

Every source of randomness in the package is keyed explicitly: worker
count, task scheduling, and execution order must never influence random
draws. ``derive_seed`` composes integer keys into a fresh 64-bit seed;
``row_keys``/``hash_uniform`` provide a stateless per-(row, index)
uniform stream used by the synthetic data generator.
"""

import numpy as np

__all__ = ["derive_seed", "row_keys", "hash_uniform"]

_MASK = (1 << 64) - 1
_GOLD_I = 0x9E3779B97F4A7C15
_GOLD = np.uint64(_GOLD_I)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = float(2.0**-53)


def derive_seed(*parts: int) -> int:
    """Hash a tuple of non-negative integer keys into a 64-bit seed.

    Stable across runs, platforms, and processes; used to give every
    fold, role, tree, and replication its own independent stream.
    """
    keys = []
    for p in parts:
        p = int(p)
        if p < 0:
            raise ValueError(f"seed components must be non-negative, got {p}")
        keys.append(p)
    return int(np.random.SeedSequence(keys).generate_state(1, np.uint64)[0])


def _mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over a uint64 array."""
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def row_keys(seed: int, row_ids: np.ndarray) -> np.ndarray:
    """Per-row uint64 keys derived from (seed, row id).

    A row's key, and hence its entire draw stream, depends only on the
    seed and its own id: rows are independent by construction.
    """
    base = np.uint64(_mix64_int(int(seed) + _GOLD_I))
    return _mix64(row_ids.astype(np.uint64) * _GOLD + base)


def hash_uniform(keys: np.ndarray, index: int) -> np.ndarray:
    """Uniform draws in the open interval (0, 1), one per key.

    ``keys`` is a uint64 array of row keys; ``index`` selects which draw
    of each row's stream to produce. Pure function of its inputs.
    """
    salt = np.uint64(_mix64_int((int(index) + 1) * _GOLD_I))
    bits = _mix64(keys ^ salt)
    return ((bits >> _S11).astype(np.float64) + 0.5) * _INV_2_53
