"""Named random sub-streams derived from a single run seed."""

import numpy as np

STREAMS = {"init": 1, "shuffle": 2, "synth": 3}


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name],)))
