"""Named, splittable random streams.

``stream(master_seed, purpose, trial, counter)`` returns a fresh
``numpy.random.Generator`` backed by PCG64.  The seed sequence is keyed by
``(crc32(purpose), trial, counter)`` so every (purpose, trial) pair gets an
independent stream and nothing depends on the order in which streams are
created.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "stream_seed", "seed_sequence", "purpose_key", "PURPOSES"]

PURPOSES = ("field", "matrix", "noise", "probe", "se")


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def seed_sequence(master_seed: int, purpose: str, trial: int = 0, counter: int = 0) -> np.random.SeedSequence:
    if master_seed < 0 or trial < 0 or counter < 0:
        raise ValueError("seeds, trial and counter must be non-negative")
    return np.random.SeedSequence(entropy=int(master_seed),
                                  spawn_key=(purpose_key(purpose), int(trial), int(counter)))


def stream(master_seed: int, purpose: str, trial: int = 0, counter: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, purpose, trial, counter)))


def stream_seed(master_seed: int, purpose: str, trial: int = 0, counter: int = 0) -> int:
    """A single 63-bit integer drawn from the stream's seed sequence (for APIs that want an int)."""
    state = seed_sequence(master_seed, purpose, trial, counter).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 ^ int(state[1])
