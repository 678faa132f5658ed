"""Deterministic basis layer: Legendre and Jacobi polynomials, normalized
associated Legendre functions, complex spherical harmonics, and Gauss-Legendre
quadrature.

Conventions baked in here and relied on everywhere else:

* The associated Legendre functions carry the Condon-Shortley phase (-1)^m,
  i.e. P_lm(mu) = (-1)^m (1-mu^2)^{m/2} d^m/dmu^m P_l(mu). Many references
  and libraries omit the phase; every sign in this package assumes it.
* ``assoc_legendre_normalized`` returns the fully normalized function
  L_lm(theta) = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!) * P_lm(cos theta),
  so that Y_lm = L_lm(theta) * exp(i m phi) has unit L^2(S^2) norm.

All evaluation uses recurrences carried entirely in the normalized functions
(no raw factorials), which stays stable far past degree 256.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INV_2SQRTPI = 0.5 / math.sqrt(math.pi)  # L_00 = Y_00 = 1/(2 sqrt(pi))


class DomainError(ValueError):
    """Argument outside the function's domain (e.g. |mu| > 1)."""


class OrderError(ValueError):
    """Invalid (degree, order) combination."""


def _check_mu(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if np.any(np.abs(mu) > 1.0):
        raise DomainError("mu must lie in [-1, 1]")
    return mu


def legendre_p(ell: int, mu) -> np.ndarray | float:
    """Legendre polynomial P_ell(mu) by the three-term recurrence.

    (l+1) P_{l+1} = (2l+1) mu P_l - l P_{l-1}; |P_ell| <= 1 on [-1, 1].
    """
    if ell < 0:
        raise OrderError("degree must be nonnegative")
    mu = _check_mu(mu)
    scalar = mu.ndim == 0
    mu = np.atleast_1d(mu)
    p_prev = np.ones_like(mu)
    if ell == 0:
        return float(p_prev[0]) if scalar else p_prev
    p = mu.copy()
    for k in range(1, ell):
        p, p_prev = ((2 * k + 1) * mu * p - k * p_prev) / (k + 1), p
    return float(p[0]) if scalar else p


def legendre_table(ellmax: int, mu) -> np.ndarray:
    """All P_0..P_ellmax at the points mu, shape (ellmax+1,) + mu.shape."""
    if ellmax < 0:
        raise OrderError("degree must be nonnegative")
    mu = np.atleast_1d(_check_mu(mu))
    out = np.empty((ellmax + 1,) + mu.shape)
    out[0] = 1.0
    if ellmax >= 1:
        out[1] = mu
    for k in range(1, ellmax):
        out[k + 1] = ((2 * k + 1) * mu * out[k] - k * out[k - 1]) / (k + 1)
    return out


def jacobi_p(ell: int, a: float, b: float, mu) -> np.ndarray | float:
    """Jacobi polynomial P_ell^{(a,b)}(mu), a, b > -1, by recurrence."""
    if ell < 0:
        raise OrderError("degree must be nonnegative")
    if a <= -1 or b <= -1:
        raise DomainError("Jacobi parameters must exceed -1")
    mu = _check_mu(mu)
    scalar = mu.ndim == 0
    table = jacobi_table(ell, a, b, np.atleast_1d(mu))
    return float(table[ell, 0]) if scalar else table[ell]


def jacobi_table(ellmax: int, a: float, b: float, mu) -> np.ndarray:
    """All P_0^{(a,b)}..P_ellmax^{(a,b)} at mu, shape (ellmax+1,) + mu.shape."""
    mu = np.atleast_1d(_check_mu(mu))
    out = np.empty((ellmax + 1,) + mu.shape)
    out[0] = 1.0
    if ellmax >= 1:
        out[1] = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * mu
    for n in range(2, ellmax + 1):
        c = 2 * n + a + b
        denom = 2 * n * (n + a + b) * (c - 2)
        out[n] = (
            (c - 1) * ((a * a - b * b) + c * (c - 2) * mu) * out[n - 1]
            - 2 * (n + a - 1) * (n + b - 1) * c * out[n - 2]
        ) / denom
    return out


def _check_order(ell: int, m: int) -> None:
    if ell < 0:
        raise OrderError("degree must be nonnegative")
    if m < 0 or m > ell:
        raise OrderError(f"order m={m} outside 0..{ell}")


def assoc_legendre_normalized(ell: int, m: int, theta) -> np.ndarray | float:
    """Fully normalized associated Legendre function L_lm(theta).

    Includes the Condon-Shortley (-1)^m phase. Computed by walking the
    sectoral diagonal L_mm and then upward in degree, all in the
    normalized functions, so no factorial over/underflow occurs.
    """
    _check_order(ell, m)
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    ct, st = np.cos(theta), np.sin(theta)

    diag = np.full_like(ct, INV_2SQRTPI)
    for k in range(m):
        diag = -np.sqrt((2 * k + 3) / (2 * k + 2)) * st * diag
    prev2 = diag
    if ell == m:
        return float(prev2[0]) if scalar else prev2
    prev1 = np.sqrt(2 * m + 3.0) * ct * diag
    for l in range(m + 2, ell + 1):
        a = math.sqrt((4 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(
            (2 * l + 1.0) * ((l - 1) * (l - 1) - m * m) / ((2 * l - 3.0) * (l * l - m * m))
        )
        prev1, prev2 = a * ct * prev1 - b * prev2, prev1
    return float(prev1[0]) if scalar else prev1


def assoc_legendre_blocks(kappa: int, thetas) -> list[np.ndarray]:
    """Per-order blocks of L_lm over a theta vector, for l, m <= kappa.

    Returns a list indexed by m; blocks[m][l - m, i] = L_lm(thetas[i]).
    This is the layout the synthesis accumulators consume directly.
    """
    if kappa < 0:
        raise OrderError("band limit must be nonnegative")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ct, st = np.cos(thetas), np.sin(thetas)
    blocks = []
    diag = np.full_like(ct, INV_2SQRTPI)
    for m in range(kappa + 1):
        rows = np.empty((kappa + 1 - m, thetas.size))
        rows[0] = diag
        if kappa - m >= 1:
            rows[1] = np.sqrt(2 * m + 3.0) * ct * diag
        for l in range(m + 2, kappa + 1):
            a = math.sqrt((4 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(
                (2 * l + 1.0)
                * ((l - 1) * (l - 1) - m * m)
                / ((2 * l - 3.0) * (l * l - m * m))
            )
            rows[l - m] = a * ct * rows[l - m - 1] - b * rows[l - m - 2]
        blocks.append(rows)
        if m < kappa:
            diag = -np.sqrt((2 * m + 3) / (2 * m + 2.0)) * st * diag
    return blocks


def assoc_legendre_row(ell: int, thetas) -> np.ndarray:
    """Single-degree row L_{ell,m}(thetas) for m = 0..ell, shape (ell+1, n).

    Memory-light alternative to assoc_legendre_blocks when only one degree
    is needed (the full triangle would be O(ell^2 n)).
    """
    if ell < 0:
        raise OrderError("degree must be nonnegative")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ct, st = np.cos(thetas), np.sin(thetas)
    out = np.empty((ell + 1, thetas.size))
    diag = np.full_like(ct, INV_2SQRTPI)
    for m in range(ell + 1):
        if m == ell:
            out[m] = diag
            break
        prev2 = diag
        prev1 = np.sqrt(2 * m + 3.0) * ct * diag
        for l in range(m + 2, ell + 1):
            a = math.sqrt((4 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(
                (2 * l + 1.0)
                * ((l - 1) * (l - 1) - m * m)
                / ((2 * l - 3.0) * (l * l - m * m))
            )
            prev1, prev2 = a * ct * prev1 - b * prev2, prev1
        out[m] = prev1 if ell > m else prev2
        diag = -np.sqrt((2 * m + 3) / (2 * m + 2.0)) * st * diag
    return out


def sph_harm(ell: int, m: int, theta, phi) -> complex | np.ndarray:
    """Complex surface spherical harmonic Y_lm(theta, phi).

    Y_lm = L_lm(theta) e^{i m phi} for m >= 0, and the negative orders
    follow the conjugation rule Y_{l,-m} = (-1)^m conj(Y_{l,m}).
    """
    if abs(m) > ell:
        raise OrderError(f"order |m|={abs(m)} exceeds degree {ell}")
    if m < 0:
        y = sph_harm(ell, -m, theta, phi)
        return (-1) ** (-m) * np.conj(y)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    val = assoc_legendre_normalized(ell, m, theta) * np.exp(1j * m * phi)
    if theta.ndim == 0 and phi.ndim == 0:
        return complex(val)
    return val


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights on (-1, 1), exact up to `degree`."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray) -> float:
        """Integral of a function given by its values at the nodes."""
        return float(np.dot(self.weights, values))


def _legendre_with_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on (-1, 1), exact for degree <= 2n-1.

    Nodes by Newton iteration on P_n from the classical cosine initial
    guesses, converged to 1e-15; the node set is antisymmetrized so the
    rule is exactly even (middle node exactly 0 for odd n).
    """
    if n < 1:
        raise DomainError("node count must be positive")
    if n == 1:
        return QuadratureRule(np.array([0.0]), np.array([2.0]), 1)
    i = np.arange(n, dtype=float)
    x = np.cos(math.pi * (i + 0.75) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_with_derivative(n, x)
        delta = p / dp
        x -= delta
        if np.max(np.abs(delta)) < 1e-15:
            break
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry about 0
    _, dp = _legendre_with_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return QuadratureRule(x, w, 2 * n - 1)
