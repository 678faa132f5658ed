"""Deterministic, nested random-number supply for Monte Carlo sampling.

Every standard normal variate consumed anywhere in the package has a fixed
address (sample_index, l, m, component, step) and is produced by a
counter-based generator (Philox), so the same (seed, address) yields the
same variate regardless of call order, thread count, or band limit:

* the 64-bit seed is the Philox key;
* (sample_index, lane) occupy the two high counter words, giving every
  sample/lane pair its own disjoint 2^128-length stream. Lane 0 holds
  static field draws; lane j+1 holds the noise of time step j, so heat
  runs never collide with the initial-field draw of the same sample;
* within a lane, (l, m, component) maps to the packed index
  l^2 (m=0), l^2 + 2m - 1 (component 1), l^2 + 2m (component 2),
  and the variate is the index-th normal of the stream.

A band-kappa draw therefore consumes exactly the first (kappa+1)^2 normals
of its lane, and the draw at any smaller band is its strict prefix — the
nesting property the coupled-truncation experiments rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_STATIC_LANE = 0


@lru_cache(maxsize=32)
def _table_indices(kappa: int):
    """Index arrays scattering a packed normal vector into (l, m) tables."""
    ls1, ms1, flat1 = [], [], []
    ls2, ms2, flat2 = [], [], []
    for ell in range(kappa + 1):
        base = ell * ell
        ls1.append(ell)
        ms1.append(0)
        flat1.append(base)
        for m in range(1, ell + 1):
            ls1.append(ell)
            ms1.append(m)
            flat1.append(base + 2 * m - 1)
            ls2.append(ell)
            ms2.append(m)
            flat2.append(base + 2 * m)
    return (
        tuple(np.array(a, dtype=np.intp) for a in (ls1, ms1, flat1)),
        tuple(np.array(a, dtype=np.intp) for a in (ls2, ms2, flat2)),
    )


@dataclass(frozen=True)
class RngStream:
    """Addressable stream of standard normals under a single 64-bit seed."""

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def _generator(self, sample_index: int, lane: int) -> np.random.Generator:
        key = np.array([np.uint64(self.seed), np.uint64(0)], dtype=np.uint64)
        counter = np.array(
            [0, 0, np.uint64(lane), np.uint64(sample_index)], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def normals(self, sample_index: int, count: int, step: int | None = None) -> np.ndarray:
        """First `count` normals of the (sample, lane) stream, in order."""
        lane = _STATIC_LANE if step is None else step + 1
        return self._generator(sample_index, lane).standard_normal(count)

    def normal_tables(
        self, sample_index: int, kappa: int, step: int | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Standard-normal coefficient tables x1[l, m] (0<=m<=l) and
        x2[l, m] (1<=m<=l) at band kappa; unused entries are zero."""
        z = self.normals(sample_index, (kappa + 1) ** 2, step=step)
        (l1, m1, f1), (l2, m2, f2) = _table_indices(kappa)
        x1 = np.zeros((kappa + 1, kappa + 1))
        x2 = np.zeros((kappa + 1, kappa + 1))
        x1[l1, m1] = z[f1]
        x2[l2, m2] = z[f2]
        return x1, x2
