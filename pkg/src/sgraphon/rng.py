"""Counter-based random streams.

Every random draw in the package comes from ``stream(seed, *counters)``: a
numpy ``Generator`` over PCG64 whose ``SeedSequence`` uses ``seed`` as entropy
and the integer counters as spawn key. Streams for different counters are
independent, so draws can be made in any order (or in parallel) and still
reproduce the serial result. Changing this scheme is a breaking change and
must bump ``RNG_NAME``.
"""

from __future__ import annotations

import numpy as np

RNG_NAME = "numpy-PCG64-SeedSequence/v1"


def stream(seed: int, *counters: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(c) for c in counters))
    return np.random.Generator(np.random.PCG64(ss))
