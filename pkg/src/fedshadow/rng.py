"""Keyed, splittable PRNG streams.

Every random decision in a run is drawn from a stream keyed by
(master_seed, purpose tag, *indices). Streams are independent of each
other and of evaluation order, which is what makes parallel client
training replay-deterministic.
"""

import numpy as np

# Purpose tags. Values are arbitrary but frozen: changing them changes
# every seeded run.
TAG_DATA = 1
TAG_SPLIT = 2
TAG_SHARD = 3
TAG_INIT = 4
TAG_SELECT = 5
TAG_TRAIN = 6
TAG_EPOCH = 7


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream keyed by (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *path: int) -> int:
    """64-bit seed deterministically derived from (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    state = ss.generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
