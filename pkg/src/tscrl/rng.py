"""Seeded random streams.

Every run draws all of its randomness from one root seed expanded into
named substreams (traffic, init, exploration, sampling, eval), so that
e.g. a change in exploration draws never perturbs the generated traffic.
Streams are numpy PCG64 generators keyed through SeedSequence with a
fixed per-stream id.
"""

from __future__ import annotations

import numpy as np

# Fixed stream ids. Changing these renumbers every derived stream.
_STREAMS = {
    "traffic": 1,
    "init": 2,
    "exploration": 3,
    "sampling": 4,
    "eval": 5,
}


def substream(root_seed: int, name: str, *key: int) -> np.random.Generator:
    """Return the PCG64 generator for a named substream of ``root_seed``.

    Extra ``key`` integers select independent members within one stream,
    e.g. one traffic stream per training episode.
    """
    if root_seed < 0:
        raise ValueError("root seed must be non-negative")
    try:
        sid = _STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown rng stream: {name!r}") from None
    seq = np.random.SeedSequence((root_seed, sid) + tuple(key))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(root_seed: int, name: str, *key: int) -> int:
    """Collapse a substream to a single reusable integer seed."""
    return int(substream(root_seed, name, *key).integers(0, 2**62))
