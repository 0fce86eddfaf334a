"""Seeded random streams.

Every random draw in the package comes from a numpy ``PCG64`` generator
built from a ``SeedSequence(seed, spawn_key=stream)``. Distinct streams are
statistically independent, so adding a client or an epsilon value never
shifts the numbers another stream sees.

Stream keys in use:

* ``(SPLIT,)``                        shuffle for the train/test split
* ``(SPLIT, eps_key)``                split shuffle when a sweep re-seeds per epsilon
* ``(PERTURB, eps_key, client_id)``   randomized response on one client
* ``(SYNTHETIC,)``                    synthetic dataset generation
"""
import numpy as np

SPLIT = 0
PERTURB = 1
SYNTHETIC = 2


def epsilon_key(epsilon):
    """Integer stream component for an epsilon value (micro-units)."""
    return int(round(float(epsilon) * 1_000_000))


def make_rng(seed, *stream):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(seq))


def check_random_state(random_state, *stream):
    """Turn ``None``/int/Generator into a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None:
        return np.random.default_rng()
    return make_rng(random_state, *stream)
