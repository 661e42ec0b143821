"""Named random substreams derived from one root seed.

Each consumer (annotator, sampler, posterior draws, subsampling, ...) owns a
fixed stream index, so adding a new consumer never shifts the draws seen by
existing ones.
"""

import numpy as np

STREAMS = {
    "instance": 0,
    "annotator": 1,
    "sampler": 2,
    "posterior": 3,
    "subsample": 4,
    "holdout": 5,
}


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for the named substream of a root seed."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), STREAMS[name])))
