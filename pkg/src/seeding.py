"""Named random sub-streams derived from a single run seed."""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Independent random streams; varying one never perturbs another."""

    SPLIT = 1
    INIT = 2
    GENERATOR = 3
    POOL = 4


def make_rng(seed: int, stream: Stream, *extra: int) -> np.random.Generator:
    """Return a generator for ``stream`` keyed by ``seed`` and optional sub-keys.

    Sub-keys let callers derive per-level or per-graph streams whose draws do not
    depend on creation order (e.g. encoders created lazily for level ``k``).
    """
    if seed < 0:
        raise ValueError(f'seed must be non-negative: {seed}')
    return np.random.default_rng([seed, int(stream), *extra])
