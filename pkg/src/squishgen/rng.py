"""Seedable counter-based random streams.

Every stochastic operation in the package draws from a Philox generator keyed
by a root seed plus an integer path (typically the pattern index).  Streams
for distinct paths are independent, and a pattern's stream does not depend on
how work is batched or distributed across workers, so batch outputs are
bitwise reproducible for a fixed root seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"stream path components must be int or str, got {type(part)!r}")


def stream(root_seed: int, *path) -> np.random.Generator:
    """Return the generator for (root_seed, *path).

    The same arguments always yield the same stream; different paths yield
    statistically independent streams.
    """
    ss = np.random.SeedSequence(
        entropy=int(root_seed), spawn_key=tuple(_as_key(p) for p in path)
    )
    return np.random.Generator(np.random.Philox(ss))
