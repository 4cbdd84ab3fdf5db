import zlib
from typing import List, Union

import numpy as np

Rng = np.random.Generator


def make_rng(seed: Union[int, np.random.SeedSequence, Rng]) -> Rng:
    """
    Seeded PCG64 generator. Every stochastic routine takes one of these or a seed.

    An existing generator is returned as is, so callers can share one stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *keys: Union[int, str]) -> int:
    """
    Deterministic child seed for a named sub-stream, e.g. derive_seed(7, "knn").

    String keys are reduced with crc32 so the result does not depend on
    PYTHONHASHSEED.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            entropy.append(zlib.crc32(key.encode("utf-8")))
        else:
            entropy.append(int(key) & 0xFFFFFFFF)
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)
    return int(state[0])


def split_rng(seed: int, n: int) -> List[Rng]:
    """n independent generators spawned from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]
