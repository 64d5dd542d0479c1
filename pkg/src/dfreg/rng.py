"""Seedable counter-based random streams.

Every source of randomness in the package is an explicit
``numpy.random.Generator`` over the Philox counter-based bit generator,
keyed by (seed, stream id). There is no global RNG state: callers create
streams and pass them down. Identical (seed, stream) always reproduces the
identical sequence.
"""

import numpy as np

# Stream ids. Keeping them distinct means e.g. the dropout stream of a run
# is unaffected by whether augmentation consumed draws earlier in the step.
INIT = 1
SHUFFLE = 2
AUGMENT = 3
DROPOUT = 4
SYNTH_TRAIN = 5
SYNTH_TEST = 6


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """A Philox generator keyed by (seed, stream)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(stream)])
    return np.random.Generator(np.random.Philox(key=key))
