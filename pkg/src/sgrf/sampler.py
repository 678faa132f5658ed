"""Field sampling: coefficient draws, truncated spectral synthesis on sphere
grids, lognormal transforms, grid norms, and serialization.

Synthesis follows the real-coefficient expansion

    T(theta, phi) = sum_l [ sqrt(A_l) X1_{l0} L_{l0}(theta)
        + sqrt(2 A_l) sum_{m=1}^{l} L_{lm}(theta)
              (X1_{lm} cos(m phi) + X2_{lm} sin(m phi)) ]

accumulated per azimuthal order m: the degree sums run over ascending l
inside each m-accumulator (a strict sequential cumsum), and the final
combine over m ascends as well. That fixed order makes nested truncation
bitwise exact: synthesizing the prefix of a draw equals the partial sum of
the full synthesis restricted to the smaller band, bit for bit. Cost is
O(kappa^2 n_theta + kappa n_theta n_phi) per sample.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .grids import SphereGrid
from .rng import RngStream
from .spectrum import Spectrum

BINARY_MAGIC = b"SGRF1"


class GridMismatchError(ValueError):
    """Two field samples do not live on the same grid."""


class FieldOverflowError(ValueError):
    """exp() of the field would overflow double precision."""


class NonPositiveRadiusError(ValueError):
    """Mesh export needs strictly positive radii."""


@dataclass(frozen=True)
class CoefficientDraw:
    """Standard-normal coefficient tables of one sample at band kappa.

    x1[l, m] holds X1_{lm} for 0 <= m <= l; x2[l, m] holds X2_{lm} for
    1 <= m <= l (X2_{l0} = 0). A draw at a smaller band is the exact
    prefix of this draw (same seed, same addresses).
    """

    kappa: int
    x1: np.ndarray
    x2: np.ndarray

    @property
    def n_variates(self) -> int:
        return (self.kappa + 1) ** 2

    def truncate(self, kappa: int) -> "CoefficientDraw":
        if kappa > self.kappa:
            raise ValueError("cannot truncate to a larger band")
        n = kappa + 1
        return CoefficientDraw(kappa, self.x1[:n, :n].copy(), self.x2[:n, :n].copy())


def draw_coefficients(
    spectrum: Spectrum, kappa: int, rng: RngStream, sample_index: int
) -> CoefficientDraw:
    """Draw the (kappa+1)^2 standard normals of one sample.

    The spectrum scales coefficients only at synthesis time; it is accepted
    here so a draw is always made against a validated field law.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    spectrum.value(0)  # touch the law: surfaces invalid spectra early
    x1, x2 = rng.normal_tables(sample_index, kappa)
    return CoefficientDraw(kappa, x1, x2)


def scaled_coefficient_tables(
    draw: CoefficientDraw, spectrum: Spectrum
) -> tuple[np.ndarray, np.ndarray]:
    """KL-scaled real coefficients: sqrt(A_l) X1_{l0}, sqrt(2 A_l) X{1,2}_{lm}."""
    kappa = draw.kappa
    a = spectrum.values_up_to(kappa)
    root = np.sqrt(a)[:, None]
    root2 = np.sqrt(2.0 * a)[:, None]
    c1 = draw.x1 * root2
    c1[:, 0] = draw.x1[:, 0] * root[:, 0]
    c2 = draw.x2 * root2
    return c1, c2


@dataclass(eq=False)
class FieldSample:
    """Real field values on a sphere grid."""

    grid: SphereGrid
    values: np.ndarray

    def to_csv(self, path) -> None:
        """Write rows (theta, phi, value) in grid order, full precision."""
        grid = self.grid
        with open(path, "w") as fh:
            fh.write("theta,phi,value\n")
            for i, th in enumerate(grid.thetas):
                for j, ph in enumerate(grid.phis):
                    fh.write(f"{th!r},{ph!r},{self.values[i, j]!r}\n")

    def to_binary(self, path) -> None:
        """Flat little-endian float64 dump with a 24-byte header."""
        n_theta, n_phi = self.values.shape
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC + b"\x00\x00\x00")
            fh.write(struct.pack("<QQ", n_theta, n_phi))
            fh.write(self.values.astype("<f8").tobytes())


def load_field_binary(path) -> np.ndarray:
    """Read back a FieldSample binary dump; returns the value matrix."""
    raw = Path(path).read_bytes()
    if raw[:5] != BINARY_MAGIC:
        raise ValueError("not a field binary (bad magic)")
    n_theta, n_phi = struct.unpack("<QQ", raw[8:24])
    values = np.frombuffer(raw[24:], dtype="<f8")
    if values.size != n_theta * n_phi:
        raise ValueError("field binary has inconsistent payload length")
    return values.reshape(n_theta, n_phi).copy()


def synthesize_scaled_nested(
    c1: np.ndarray,
    c2: np.ndarray,
    kappa: int,
    grid: SphereGrid,
    bands: list[int],
) -> list[FieldSample]:
    """Partial-sum fields at each requested band from scaled coefficients.

    `bands` must be ascending and end at most at kappa. The band-b output
    is bitwise identical to a direct synthesis of the band-b prefix.
    """
    if sorted(bands) != list(bands) or bands[-1] > kappa or bands[0] < 0:
        raise ValueError("bands must be ascending and within the draw band")
    n_theta, n_phi = grid.shape
    blocks = grid.legendre_blocks(kappa)
    cos_t, sin_t = grid.azimuth_tables(kappa)

    # per-order accumulators at every checkpoint band (cumsum = ascending l)
    alpha = [np.zeros((kappa + 1, n_theta)) for _ in bands]
    beta = [np.zeros((kappa + 1, n_theta)) for _ in bands]
    for m in range(kappa + 1):
        rows = np.cumsum(c1[m:, m][:, None] * blocks[m], axis=0)
        srows = np.cumsum(c2[m:, m][:, None] * blocks[m], axis=0) if m > 0 else None
        for k, b in enumerate(bands):
            if b >= m:
                alpha[k][m] = rows[b - m]
                if m > 0:
                    beta[k][m] = srows[b - m]

    out = []
    for k, b in enumerate(bands):
        values = np.zeros((n_theta, n_phi))
        for m in range(b + 1):
            values += alpha[k][m][:, None] * cos_t[m][None, :]
            if m > 0:
                values += beta[k][m][:, None] * sin_t[m][None, :]
        out.append(FieldSample(grid, values))
    return out


def synthesize(draw: CoefficientDraw, spectrum: Spectrum, grid: SphereGrid) -> FieldSample:
    """Field values of one draw on the grid (see module docstring)."""
    c1, c2 = scaled_coefficient_tables(draw, spectrum)
    return synthesize_scaled_nested(c1, c2, draw.kappa, grid, [draw.kappa])[0]


def synthesize_nested(
    draw: CoefficientDraw, spectrum: Spectrum, grid: SphereGrid, bands: list[int]
) -> list[FieldSample]:
    """Fields at several nested bands of one draw, cheapest way to couple
    truncations (one accumulator pass, one combine per band)."""
    c1, c2 = scaled_coefficient_tables(draw, spectrum)
    return synthesize_scaled_nested(c1, c2, draw.kappa, grid, bands)


def lognormal_transform(field: FieldSample) -> FieldSample:
    """Pointwise exp of the field; values above 700 would overflow."""
    if np.any(field.values > 700.0):
        raise FieldOverflowError("field values exceed 700; exp() would overflow")
    return FieldSample(field.grid, np.exp(field.values))


class GridNorms(NamedTuple):
    l2: float
    sup: float


def grid_norms(a: FieldSample, b: FieldSample) -> GridNorms:
    """Quadrature L2 norm and grid sup norm of the difference a - b."""
    if a.grid is not b.grid and not a.grid.same_lattice(b.grid):
        raise GridMismatchError("field samples live on different grids")
    d = a.values - b.values
    l2 = float(np.sqrt(np.sum(a.grid.weights * d * d)))
    sup = float(np.max(np.abs(d)))
    return GridNorms(l2=l2, sup=sup)


def export_deformed_mesh(field: FieldSample, path) -> None:
    """Write a Wavefront OBJ of the sphere deformed by the field radius.

    Vertex (i, j) sits at r_ij (sin t cos p, sin t sin p, cos t); quad faces
    tile the grid (wrapping in phi) and two pole vertices close the caps
    with triangle fans. All faces wind counterclockwise seen from outside.
    """
    r = field.values
    if np.any(r <= 0.0):
        raise NonPositiveRadiusError("mesh radii must be positive")
    grid = field.grid
    n_theta, n_phi = r.shape
    st, ct = np.sin(grid.thetas), np.cos(grid.thetas)
    cp, sp = np.cos(grid.phis), np.sin(grid.phis)

    lines = []
    for i in range(n_theta):
        for j in range(n_phi):
            x = r[i, j] * st[i] * cp[j]
            y = r[i, j] * st[i] * sp[j]
            z = r[i, j] * ct[i]
            lines.append(f"v {x!r} {y!r} {z!r}")
    north = float(np.mean(r[0]))
    south = float(np.mean(r[-1]))
    lines.append(f"v 0.0 0.0 {north!r}")
    lines.append(f"v {0.0!r} {0.0!r} {-south!r}")

    def vid(i, j):  # OBJ indices are 1-based; phi wraps
        return i * n_phi + (j % n_phi) + 1

    north_id = n_theta * n_phi + 1
    south_id = n_theta * n_phi + 2
    for i in range(n_theta - 1):
        for j in range(n_phi):
            lines.append(
                f"f {vid(i, j)} {vid(i + 1, j)} {vid(i + 1, j + 1)} {vid(i, j + 1)}"
            )
    for j in range(n_phi):
        lines.append(f"f {north_id} {vid(0, j)} {vid(0, j + 1)}")
        lines.append(f"f {south_id} {vid(n_theta - 1, j + 1)} {vid(n_theta - 1, j)}")
    Path(path).write_text("\n".join(lines) + "\n")
