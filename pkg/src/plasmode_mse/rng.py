"""Deterministic random stream derivation.

Every random draw in a study comes from a stream identified by a path of
counters below the master seed, e.g. ``(STUDY, k, ROLE_NOISE)``.  Streams are
Philox generators keyed through :class:`numpy.random.SeedSequence`, so the
stream for a path never depends on which worker asks for it or in which order.
"""
from __future__ import annotations

import hashlib
from typing import Sequence, Union

import numpy as np

Counter = Union[int, str]

# Top-level namespaces keep study and oracle paths disjoint.
NS_STUDY = 0
NS_TRUTH = 1
NS_ESTIMATOR = 2

# Roles inside one study repetition.
ROLE_DESIGN = 1
ROLE_NOISE = 2
ROLE_SOURCE = 3
ROLE_RESAMPLE = 4
ROLE_PLUGIN = 5


def _as_counter(c: Counter) -> int:
    if isinstance(c, (bool, np.bool_)):
        raise TypeError("path counters must be integers or strings, not bool")
    if isinstance(c, (int, np.integer)):
        if c < 0:
            raise ValueError(f"path counters must be non-negative, got {c}")
        return int(c)
    if isinstance(c, str):
        digest = hashlib.blake2b(c.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported path counter {c!r}")


def derive_stream(master_seed: int, path: Sequence[Counter]) -> np.random.Generator:
    """Return the generator for ``path`` below ``master_seed``.

    Identical ``(master_seed, path)`` pairs always give identical draw
    sequences, and paths are order sensitive: ``(1, 2)`` and ``(2, 1)`` are
    distinct streams.  String counters are hashed to 64-bit integers.
    """
    if len(path) == 0:
        raise ValueError("stream path must be non-empty")
    if int(master_seed) < 0:
        raise ValueError("master seed must be non-negative")
    key = tuple(_as_counter(c) for c in path)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
