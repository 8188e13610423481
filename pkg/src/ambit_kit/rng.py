"""Counter-based random streams keyed by (root seed, coordinates).

Each stream is a Philox generator whose seed sequence is spawned from the
root seed at a fixed key, so the draws for one grid cell (or one Monte
Carlo path) never depend on how many other cells exist or in which order
workers visit them.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key: int) -> int:
    """A derived 64-bit seed, e.g. for one Monte Carlo replication."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
