"""Deterministic keyed random streams built on the Philox counter generator.

Every random quantity in this package is addressed by a triple
``(master_seed, replica_id, stream_label)``.  The triple is packed
injectively into a 128-bit Philox key, so distinct triples yield
statistically independent streams and the same triple always replays
the same stream, regardless of process, worker count, or call order.

Philox is counter based: constructing it with ``counter=c`` positions
the stream at 64-bit draw ``4*c`` (one 256-bit counter block yields four
64-bit outputs, and one ``random()`` double consumes one output).  That
gives O(1) random access into a replica's energy stream.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

# Stream labels used by the package.  Values below 2**16 are valid;
# labels not listed here are free for callers (tests use 100+).
ENERGY_STREAM = 0
POISSON_STREAM = 1
STICK_STREAM = 2
RETRY_SEED_INCREMENT = 1  # documented retry rule: master_seed + 1

_MASTER_BITS = 64
_REPLICA_BITS = 48
_LABEL_BITS = 16


def seed_derivation(master_seed: int, replica_id: int, stream_label: int = 0) -> int:
    """Pack (master_seed, replica_id, stream_label) into a 128-bit stream key.

    Layout: high 64 bits are the master seed, low 64 bits are
    ``replica_id * 2**16 + stream_label``.  The packing is injective on
    the validated domain, so no two triples share a key.
    """
    if not isinstance(master_seed, (int, np.integer)) or isinstance(master_seed, bool):
        raise ValueError(f"master_seed must be an integer, got {master_seed!r}")
    if not 0 <= master_seed < (1 << _MASTER_BITS):
        raise ValueError(f"master_seed must be in [0, 2**64), got {master_seed}")
    if not isinstance(replica_id, (int, np.integer)) or isinstance(replica_id, bool):
        raise ValueError(f"replica_id must be an integer, got {replica_id!r}")
    if not 0 <= replica_id < (1 << _REPLICA_BITS):
        raise ValueError(f"replica_id must be in [0, 2**48), got {replica_id}")
    if not 0 <= stream_label < (1 << _LABEL_BITS):
        raise ValueError(f"stream_label must be in [0, 2**16), got {stream_label}")
    return (int(master_seed) << 64) | (int(replica_id) << _LABEL_BITS) | int(stream_label)


def stream_generator(master_seed: int, replica_id: int, stream_label: int = 0) -> Generator:
    """A fresh Generator positioned at the start of the addressed stream."""
    return Generator(Philox(key=seed_derivation(master_seed, replica_id, stream_label)))


def uniform_block(key: int, start: int, stop: int) -> np.ndarray:
    """Uniform [0, 1) doubles at positions [start, stop) of the keyed stream.

    Deterministic random access: the same (key, position) always yields
    the same double, whether positions are visited in one sweep or in
    arbitrary disjoint blocks.
    """
    if start < 0 or stop < start:
        raise ValueError(f"invalid block [{start}, {stop})")
    if stop == start:
        return np.empty(0)
    block, skip = divmod(start, 4)
    gen = Generator(Philox(key=key, counter=block))
    out = gen.random(stop - start + skip)
    return out[skip:] if skip else out
