"""Deterministic random streams: one master seed, named substreams."""

from __future__ import annotations

import numpy as np

_STREAMS = {
    "init": 0,
    "exploration": 1,
    "noise": 2,
    "sampler": 3,
    "model": 4,
    "dataset": 5,
    "evaluate": 6,
}


def substream(master_seed: int, name: str) -> np.random.Generator:
    try:
        idx = _STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown stream {name!r}; known: {sorted(_STREAMS)}") from None
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(idx,))
    return np.random.default_rng(ss)


def stream_seed(master_seed: int, name: str) -> int:
    """A derived integer seed (for APIs that take seeds, not generators)."""
    idx = _STREAMS[name]
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(idx,))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))
