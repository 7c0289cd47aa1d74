"""Counter-based random streams.

Every random draw in a simulation is addressed by a key derived from
``(master seed, repeat, purpose)`` and a counter ``(round, arm)``.  Nothing a
learner observes ever enters a key, so the perturbations are non-adaptive by
construction and two learners run on the same keys see identical contexts.
"""

from __future__ import annotations

import enum

import numpy as np


class Purpose(enum.IntEnum):
    THETA = 0
    RAW_CONTEXT = 1
    PERTURBATION = 2
    REWARD_NOISE = 3
    DIAGNOSTIC = 4


def derive_key(*entropy: int) -> int:
    """Collapse integer entropy into a 128-bit Philox key."""
    words = np.random.SeedSequence([int(e) for e in entropy]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


class StreamFactory:
    """Hands out independent generators for one episode.

    >>> f = StreamFactory(seed=7, repeat=0)
    >>> a = f.generator(Purpose.PERTURBATION, 3, 1).standard_normal()
    >>> b = StreamFactory(7, 0).generator(Purpose.PERTURBATION, 3, 1).standard_normal()
    >>> a == b
    True
    """

    def __init__(self, seed: int, repeat: int = 0):
        self.seed = int(seed)
        self.repeat = int(repeat)
        self._keys: dict[int, int] = {}

    def _key(self, purpose: Purpose) -> int:
        if purpose not in self._keys:
            self._keys[purpose] = derive_key(self.seed, self.repeat, int(purpose))
        return self._keys[purpose]

    def generator(self, purpose: Purpose, round_: int = 0, arm: int = 0) -> np.random.Generator:
        if round_ < 0 or arm < 0:
            raise ValueError("stream counters must be non-negative")
        # draws advance the low words; (round, arm) sit in the high words
        counter = [0, 0, int(round_), int(arm)]
        return np.random.Generator(np.random.Philox(key=self._key(purpose), counter=counter))
