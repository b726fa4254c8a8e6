"""Probability densities sampled on a symmetric uniform grid.

All integrals use the trapezoid rule.  Grids are built so that node ``i``
and node ``n-1-i`` are exact negatives of each other; odd moments of a
grid-symmetric density then cancel exactly, not just to rounding.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from math import e

import numpy as np
from scipy.special import xlogy

from .potentials import ConfiningPotential, InteractionPotential, Polynomial, convolve_with_moments, global_min, real_roots

MASS_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if self.n < 16:
            raise ValueError("grid needs at least 16 nodes")
        if self.lo != -self.hi:
            raise ValueError("grid must be symmetric about 0 (lo == -hi)")

    @classmethod
    def symmetric(cls, L: float, n: int) -> "Grid":
        return cls(-float(L), float(L), int(n))

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        k = 2 * np.arange(self.n) - (self.n - 1)
        x = self.hi * k / (self.n - 1)
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        w.flags.writeable = False
        return w

    @cached_property
    def _half_weights(self) -> np.ndarray:
        h = self.n // 2
        w = self.weights[h:].copy()
        if self.n % 2:
            w[0] *= 0.5
        return w

    def integrate(self, f: np.ndarray) -> float:
        """Trapezoid rule, summing mirrored pairs ``f(x) + f(-x)`` first.

        The pairing makes the result bitwise invariant under reflection.
        """
        f = np.asarray(f, dtype=float)
        h = self.n // 2
        left = f[h::-1] if self.n % 2 else f[h - 1::-1]
        return float(np.dot(self._half_weights, f[h:] + left))

    def refined(self) -> "Grid":
        """Same domain with the spacing halved."""
        return Grid(self.lo, self.hi, 2 * self.n - 1)


def default_grid(V: ConfiningPotential, eps: float, n: int = 801, margin: float = 40.0) -> Grid:
    """Truncate the line at the smallest ``L >= 2a`` with ``V(L) - eps L^2/4 >= V(a) + margin*eps``."""
    target = float(V(V.a)) + margin * eps
    p = V.poly - Polynomial((target, 0.0, eps / 4.0))
    L = max([r for r in real_roots(p) if r > 0], default=0.0)
    return Grid.symmetric(max(L, 2.0 * V.a), n)


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Moments ``m_0 .. m_K`` of a measure (``m_0`` is its mass)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 1:
            raise ValueError("moment vector must be a nonempty 1-D sequence")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def K(self) -> int:
        return len(self.values) - 1

    @property
    def m1(self) -> float:
        return float(self.values[1])

    @property
    def m2(self) -> float:
        return float(self.values[2])

    def check(self, tol: float = 1e-8) -> None:
        """Raise ValueError unless ``m0 = 1``, even moments >= 0 and ``m2 >= m1^2``."""
        v = self.values
        if abs(v[0] - 1.0) > tol:
            raise ValueError(f"m0 = {v[0]} is not 1")
        if np.any(v[2::2] < -tol):
            raise ValueError("negative even moment")
        if len(v) > 2 and v[2] < v[1] ** 2 - tol:
            raise ValueError("m2 < m1^2 violates Jensen")

    def reflected(self) -> "MomentVector":
        sign = (-1.0) ** np.arange(len(self.values))
        return MomentVector(self.values * sign)

    @classmethod
    def dirac(cls, c: float, K: int) -> "MomentVector":
        return cls(float(c) ** np.arange(K + 1))

    @classmethod
    def gaussian(cls, mu: float, sigma: float, K: int) -> "MomentVector":
        # recursion m_k = mu m_{k-1} + (k-1) sigma^2 m_{k-2}
        m = np.zeros(K + 1)
        m[0] = 1.0
        if K >= 1:
            m[1] = mu
        for k in range(2, K + 1):
            m[k] = mu * m[k - 1] + (k - 1) * sigma**2 * m[k - 2]
        return cls(m)


def moment_distance(a, b, orders=(1, 2, 3, 4)) -> float:
    """Euclidean distance between two moment vectors on the given orders."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    idx = [k for k in orders if k < len(a) and k < len(b)]
    return float(np.linalg.norm(a[idx] - b[idx]))


@dataclass(frozen=True, eq=False)
class GridDensity:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def normalized(self) -> "GridDensity":
        m = self.mass
        if not m > 0:
            raise ValueError("cannot normalize a density with zero mass")
        return GridDensity(self.grid, self.values / m)

    def is_normalized(self, tol: float = MASS_TOL) -> bool:
        return abs(self.mass - 1.0) <= tol

    def reflected(self) -> "GridDensity":
        return GridDensity(self.grid, self.values[::-1])

    def sup_distance(self, other: "GridDensity") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    @classmethod
    def from_function(cls, grid: Grid, f) -> "GridDensity":
        return cls(grid, np.asarray(f(grid.x), dtype=float)).normalized()

    @classmethod
    def gaussian(cls, grid: Grid, mu: float = 0.0, sigma: float = 1.0) -> "GridDensity":
        return cls.mixture(grid, [(1.0, mu, sigma)])

    @classmethod
    def mixture(cls, grid: Grid, components) -> "GridDensity":
        """Normalized Gaussian mixture from ``(weight, mean, std)`` triples."""
        x = grid.x
        v = np.zeros_like(x)
        for w, mu, s in components:
            v = v + w * np.exp(-0.5 * ((x - mu) / s) ** 2) / (s * np.sqrt(2 * np.pi))
        return cls(grid, v).normalized()


def _powers(x: np.ndarray, K: int) -> np.ndarray:
    P = np.empty((K + 1, len(x)))
    P[0] = 1.0
    for k in range(1, K + 1):
        P[k] = P[k - 1] * x
    return P


def moments(u: GridDensity, K: int) -> MomentVector:
    """Trapezoid moments ``m_0 .. m_K``; ``m_0`` is the raw computed mass.

    Even orders integrate the symmetric part of ``u`` and odd orders its
    antisymmetric part, which is exactly zero for a grid-symmetric density.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    g = u.grid
    v = u.values
    sym = 0.5 * (v + v[::-1])
    anti = 0.5 * (v - v[::-1])
    P = _powers(g.x, K) * g.weights
    out = np.empty(K + 1)
    out[0::2] = P[0::2] @ sym
    out[1::2] = P[1::2] @ anti
    return MomentVector(out)


def entropy(u: GridDensity) -> float:
    """Trapezoid ``int u log u`` with ``0 log 0 = 0``."""
    return u.grid.integrate(xlogy(u.values, u.values))


@dataclass(frozen=True)
class FreeEnergyBreakdown:
    entropy_term: float
    confinement_term: float
    interaction_term: float
    total: float

    @classmethod
    def from_terms(cls, entropy_term: float, confinement_term: float, interaction_term: float):
        return cls(entropy_term, confinement_term, interaction_term,
                   entropy_term + confinement_term + interaction_term)

    @property
    def upsilon(self) -> float:
        """Energy without the entropy part."""
        return self.confinement_term + self.interaction_term


def interaction_polynomial(u: GridDensity, F) -> Polynomial:
    """``F * u`` as a polynomial, built from the moments of ``u``."""
    p = F.poly if isinstance(F, InteractionPotential) else F
    if p.is_zero:
        return Polynomial((0.0,))
    return convolve_with_moments(p, moments(u, p.degree))


def free_energy(u: GridDensity, V, F, eps: float) -> FreeEnergyBreakdown:
    """Entropy, confinement and interaction parts of the free energy.

    The interaction ``1/2 int (F*u) u`` costs ``O(n deg F)`` through the
    moment-built convolution polynomial.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    ent = 0.5 * eps * entropy(u)
    conf = g.integrate(V(g.x) * u.values)
    inter = 0.5 * g.integrate(interaction_polynomial(u, F)(g.x) * u.values)
    return FreeEnergyBreakdown.from_terms(ent, conf, inter)


def upsilon(u: GridDensity, V, F) -> float:
    """Energy without entropy: ``int V u + 1/2 iint F(x-y) u u``."""
    g = u.grid
    conf = g.integrate(V(g.x) * u.values)
    return conf + 0.5 * g.integrate(interaction_polynomial(u, F)(g.x) * u.values)


def reduced_free_energy(u: GridDensity, V, eps: float) -> float:
    """Free energy without interaction and without the positive entropy part."""
    g = u.grid
    v = u.values
    neg = np.where(v < 1.0, xlogy(v, v), 0.0)
    return 0.5 * eps * g.integrate(neg) + g.integrate(V(g.x) * v)


def free_energy_lower_bound(V, eps: float) -> float:
    """``-eps/4 - 4 eps/e + min_x (V(x) - eps x^2 / 4)``, a floor for the free energy."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    p = V.poly if isinstance(V, ConfiningPotential) else V
    _, vmin = global_min(p - Polynomial((0.0, 0.0, eps / 4.0)))
    return -eps / 4.0 - 4.0 * eps / e + vmin


def symmetrize(u: GridDensity) -> GridDensity:
    v = u.values
    return GridDensity(u.grid, 0.5 * (v + v[::-1])).normalized()


def is_symmetric(u: GridDensity, tol: float = 1e-12) -> bool:
    return float(np.max(np.abs(u.values - u.values[::-1]))) <= tol


def write_density_csv(u: GridDensity, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        for xi, ui in zip(u.grid.x, u.values):
            w.writerow([repr(float(xi)), repr(float(ui))])


def read_density_csv(path) -> GridDensity:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["x", "u"]:
        raise ValueError(f"{path}: expected header 'x,u'")
    data = np.array(rows[1:], dtype=float)
    grid = Grid(float(data[0, 0]), float(data[-1, 0]), len(data))
    return GridDensity(grid, data[:, 1])
