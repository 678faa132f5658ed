"""Evaluation lattices on the sphere with quadrature weights.

Two kinds:

* ``equiangular``: theta_i = (i + 1/2) pi / n_theta (pole-free), uniform
  phi. Latitude weights are exact band areas (cos of the band edges), so
  the weights sum to 4 pi exactly; the rule is not exact for band-limited
  integrands.
* ``gauss_latitudes``: theta at Gauss-Legendre nodes in mu = cos theta,
  uniform phi. Integrates products of band-limited fields exactly up to
  the grid's stated degree min(2 n_theta - 1, n_phi - 1).

Basis tables needed by synthesis (associated Legendre blocks per band and
cos/sin azimuth tables) are cached on the grid; they are pure functions of
the grid so concurrent recomputation is harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import assoc_legendre_blocks, gauss_legendre


@dataclass(eq=False)
class SphereGrid:
    """(theta, phi) lattice with per-node quadrature weights."""

    thetas: np.ndarray
    phis: np.ndarray
    weights: np.ndarray  # shape (n_theta, n_phi), sums to 4 pi
    kind: str
    exact_degree: int | None = None
    _legendre_cache: dict = field(default_factory=dict, repr=False)
    _azimuth_cache: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.thetas.size, self.phis.size)

    def legendre_blocks(self, kappa: int) -> list[np.ndarray]:
        blocks = self._legendre_cache.get(kappa)
        if blocks is None:
            blocks = assoc_legendre_blocks(kappa, self.thetas)
            self._legendre_cache[kappa] = blocks
        return blocks

    def azimuth_tables(self, mmax: int) -> tuple[np.ndarray, np.ndarray]:
        """cos(m phi_j) and sin(m phi_j) tables, shape (mmax+1, n_phi)."""
        tabs = self._azimuth_cache.get(mmax)
        if tabs is None:
            m = np.arange(mmax + 1)[:, None]
            tabs = (np.cos(m * self.phis[None, :]), np.sin(m * self.phis[None, :]))
            self._azimuth_cache[mmax] = tabs
        return tabs

    def same_lattice(self, other: "SphereGrid") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.thetas, other.thetas)
            and np.array_equal(self.phis, other.phis)
            and np.array_equal(self.weights, other.weights)
        )


def equiangular_grid(n_theta: int, n_phi: int) -> SphereGrid:
    """Pole-free midpoint lattice; weights are exact latitude-band areas."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid dimensions must be positive")
    i = np.arange(n_theta)
    thetas = (i + 0.5) * math.pi / n_theta
    edges = np.cos(np.arange(n_theta + 1) * math.pi / n_theta)
    theta_w = edges[:-1] - edges[1:]  # telescopes to exactly 2
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    weights = np.outer(theta_w, np.full(n_phi, 2.0 * math.pi / n_phi))
    return SphereGrid(thetas, phis, weights, kind="equiangular")


def gauss_grid(n_theta: int, n_phi: int) -> SphereGrid:
    """Gauss latitudes x uniform longitudes; exact through its stated degree."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid dimensions must be positive")
    rule = gauss_legendre(n_theta)
    # mu ascending corresponds to theta descending; store theta ascending
    thetas = np.arccos(rule.nodes)[::-1].copy()
    theta_w = rule.weights[::-1].copy()
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    weights = np.outer(theta_w, np.full(n_phi, 2.0 * math.pi / n_phi))
    return SphereGrid(
        thetas,
        phis,
        weights,
        kind="gauss_latitudes",
        exact_degree=min(2 * n_theta - 1, n_phi - 1),
    )


def make_grid(kind: str, n_theta: int, n_phi: int) -> SphereGrid:
    if kind == "equiangular":
        return equiangular_grid(n_theta, n_phi)
    if kind == "gauss_latitudes":
        return gauss_grid(n_theta, n_phi)
    raise ValueError(f"unknown grid kind {kind!r}")
