"""Splittable seed derivation for the replica farm.

Seeds for distinct (role, N, replica) paths come from distinct SeedSequence
entropy tuples, so they are collision-free by construction and independent of
scheduling.
"""

from __future__ import annotations

import numpy as np

ROLE_INITIAL = 1
ROLE_EVENTS = 2
ROLE_REFERENCE_INITIAL = 3
ROLE_REFERENCE_EVENTS = 4
ROLE_SLICED = 5


def derive_seed(base_seed: int, *path: int) -> int:
    """64-bit seed for the given derivation path under the base seed."""
    ss = np.random.SeedSequence((int(base_seed),) + tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])
