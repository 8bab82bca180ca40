"""Seeded random-number streams.

Every stochastic operation in the package takes an explicit integer seed and
derives an independent stream from it with :func:`generator`. Streams are
counter-based (Philox) so sub-streams for (seed, tag, index...) tuples are
independent and reproducible regardless of the order they are consumed in.
Exact bit streams are implementation-specific; distributions are portable.
"""

from __future__ import annotations

import numpy as np


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("seed parts must be non-negative integers")
        return int(part)
    if isinstance(part, str):
        # stable small-alphabet string -> integer code, no hashing randomness
        return int.from_bytes(part.encode("ascii"), "big")
    raise TypeError(f"unsupported seed part {part!r}")


def generator(seed: int, *stream) -> np.random.Generator:
    """Return a Philox-backed Generator for (seed, *stream).

    Parameters
    ----------
    seed : int
        Non-negative base seed.
    *stream : int or str
        Optional sub-stream labels; distinct tuples give independent streams.
    """
    entropy = [_encode(seed)] + [_encode(p) for p in stream]
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(entropy)))


def derive(seed: int, *stream) -> int:
    """Deterministically derive a child integer seed from (seed, *stream),
    for APIs that take plain integer seeds."""
    entropy = [_encode(seed)] + [_encode(p) for p in stream]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint32)[0])
