"""Reproducible driving noise for ensembles of paths.

Each Monte Carlo path owns a counter-based Philox stream keyed by
(master_seed, path_index), so any subset of paths can be generated on any
worker in any order and still reproduce the published numbers.  Within a
path the draws are sequential; the Gaussian transform is numpy's ziggurat
and is fixed for reproducibility.

A "slab" is the vector of per-cell Wiener increments for one time step:
m i.i.d. N(0, dt/h) variables, matching per-cell Wiener processes with
covariance (s ^ t)/h.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

from .lattice import GridSpec

_DETACHED_OFFSET = np.uint64(1) << np.uint64(62)


class NoiseStream:
    """Deterministic Gaussian stream for one path of one ensemble."""

    def __init__(self, master_seed: int, path_index: int):
        if path_index < 0:
            raise ValueError(f"path_index must be nonnegative, got {path_index}")
        self.master_seed = int(master_seed)
        self.path_index = int(path_index)
        key = np.array(
            [np.uint64(self.master_seed & (2**64 - 1)), np.uint64(self.path_index)],
            dtype=np.uint64,
        )
        self._gen = Generator(Philox(key=key))
        self._next_step = 0

    def normals(self, count: int) -> np.ndarray:
        """Next `count` i.i.d. standard normal draws of this stream."""
        return self._gen.standard_normal(count)

    def detached_generator(self) -> Generator:
        """Independent generator for samplers with variable draw counts.

        Starts in a counter region far from the sequential stream, so the
        exact-transition samplers never collide with slab draws.
        """
        key = np.array(
            [np.uint64(self.master_seed & (2**64 - 1)), np.uint64(self.path_index)],
            dtype=np.uint64,
        )
        counter = np.array([0, 0, 0, _DETACHED_OFFSET], dtype=np.uint64)
        return Generator(Philox(key=key, counter=counter))

    @property
    def next_step(self) -> int:
        return self._next_step

    def __repr__(self):
        return f"NoiseStream(master_seed={self.master_seed}, path_index={self.path_index})"


def derive_stream(master_seed: int, path_index: int) -> NoiseStream:
    """Stream for path `path_index` of the ensemble seeded by `master_seed`."""
    return NoiseStream(master_seed, path_index)


def sample_slab(stream: NoiseStream, step: int, spec: GridSpec, dt: float) -> np.ndarray:
    """Wiener-sheet increments for one time step: m draws ~ N(0, dt/h).

    Steps must be consumed in order (0, 1, 2, ...); the slab at a given
    step is then a pure function of (master_seed, path_index, step).
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if step != stream._next_step:
        raise ValueError(
            f"slabs must be drawn sequentially: expected step {stream._next_step}, got {step}"
        )
    stream._next_step += 1
    return stream.normals(spec.m) * np.sqrt(dt * spec.m)
