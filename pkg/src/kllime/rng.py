"""Seed derivation.

Every random stream is a Philox4x64 generator keyed by a numpy
``SeedSequence``. Streams are derived from a root seed by a textual label
(hashed with CRC-32) and optionally an integer index, so that any component
can be reproduced on its own.
"""
import zlib

import numpy as np


def _label_key(label):
    return zlib.crc32(label.encode("utf-8"))


def generator(seed, *key):
    """Philox generator for ``seed`` and a spawn key of ints or labels."""
    spawn = tuple(_label_key(k) if isinstance(k, str) else int(k) for k in key)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, label):
    """A 64-bit child seed of ``seed`` for the component named ``label``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_label_key(label),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
