"""Named random substreams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("init", "dropout", "shuffle", "tie-break", "data")


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``name``; stable across platforms and runs.

    ``extra`` integers (fold index, epoch, ...) further split the stream.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key, *map(int, extra)]))
