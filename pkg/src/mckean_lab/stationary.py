"""Stationary measures as fixed points of the self-consistent Gibbs map.

A stationary density satisfies ``u = Z^{-1} exp(-(2/eps)(V + F*u))``.
Because ``F*u`` is a polynomial whose coefficients are linear in the
moments of ``u``, the fixed-point problem lives on a finite moment vector:

    m  ->  moments(gibbs_density(m)).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateNormalization, NoAdmissibleRoot
from .measures import (
    FreeEnergyBreakdown,
    Grid,
    GridDensity,
    MomentVector,
    free_energy,
    moment_distance,
    moments,
)
from .pde import eta
from .potentials import InteractionPotential, Polynomial, convolve_with_moments, real_roots

SYMMETRIC = "symmetric"
PLUS = "asymmetric_plus"
MINUS = "asymmetric_minus"

SEED_STD = 0.2
ODD_MOMENT_TOL = 1e-9


def _fpoly(F) -> Polynomial:
    return F.poly if isinstance(F, InteractionPotential) else F


def gibbs_density(m, V, F, eps: float, grid: Grid) -> GridDensity:
    """``Z^{-1} exp(-(2/eps)(V + F*u))`` with ``F*u`` built from the moments ``m``."""
    x = grid.x
    W = V(x) + convolve_with_moments(_fpoly(F), m)(x)
    e = np.exp(-(2.0 / eps) * (W - np.min(W)))
    Z = grid.integrate(e)
    if not np.isfinite(Z) or Z < 1e-300:
        raise DegenerateNormalization(f"normalization constant {Z!r} is degenerate")
    edge = max(e[0], e[-1]) / Z
    if edge > 1e-10:
        raise DegenerateNormalization(
            f"Gibbs density reaches the domain edge (u={edge:.2e}); widen the grid")
    return GridDensity(grid, e / Z)


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.5
    tol: float = 1e-12
    max_iter: int = 5000
    min_damping: float = 1e-4
    eta_tol: float = 1e-7
    moment_order: int = 4


@dataclass(frozen=True)
class StationaryMeasure:
    density: GridDensity
    moments: MomentVector
    free_energy: FreeEnergyBreakdown
    symmetry: str
    residual: float
    eta_norm: float
    iterations: int = 0

    @property
    def certified(self) -> bool:
        return np.isfinite(self.residual) and np.isfinite(self.eta_norm)


@dataclass(frozen=True)
class NoConvergence:
    """Fixed-point iteration ran out of budget; not an exception."""

    seed: MomentVector
    last_moments: MomentVector
    residual: float
    iterations: int


def classify(m: MomentVector, tol: float = ODD_MOMENT_TOL) -> str:
    odd = np.abs(m.values[1::2])
    if np.all(odd <= tol):
        return SYMMETRIC
    return PLUS if m.values[1] > 0 else MINUS


def fixed_point_solve(seed, V, F, eps: float, grid: Grid,
                      cfg: FixedPointConfig = FixedPointConfig()):
    """Damped iteration ``m <- (1-lam) m + lam G(m)`` from ``seed``.

    ``lam`` starts at ``cfg.damping`` and is halved whenever the residual
    ``|G(m) - m|`` grows.  Returns a certified StationaryMeasure, or a
    NoConvergence record when ``max_iter`` is exhausted.
    """
    p = _fpoly(F)
    K = max(cfg.moment_order, p.degree, 1)
    seed = seed if isinstance(seed, MomentVector) else MomentVector(seed)
    if len(seed) < K + 1:
        raise ValueError(f"seed must carry moments up to order {K}")
    if not np.all(np.isfinite(seed.values)):
        raise ValueError("seed moments must be finite")
    m = np.array(seed.values[:K + 1], dtype=float)
    lam = cfg.damping
    prev = np.inf
    res = np.inf
    for it in range(1, cfg.max_iter + 1):
        u = gibbs_density(m, V, F, eps, grid)
        gm = moments(u, K).values
        res = float(np.max(np.abs(gm - m)))
        if res < cfg.tol:
            return _certify(u, V, F, eps, K, res, it)
        if res > prev and lam > cfg.min_damping:
            lam *= 0.5
        prev = res
        m = (1.0 - lam) * m + lam * gm
    return NoConvergence(seed, MomentVector(m), res, cfg.max_iter)


def _certify(u: GridDensity, V, F, eps: float, K: int, residual: float, iterations: int) -> StationaryMeasure:
    mv = moments(u, K)
    eta_norm = float(np.max(np.abs(eta(u, V, F, eps))))
    return StationaryMeasure(
        density=u,
        moments=mv,
        free_energy=free_energy(u, V, F, eps),
        symmetry=classify(mv),
        residual=residual,
        eta_norm=eta_norm,
        iterations=iterations,
    )


def find_x0(V, F) -> float:
    """Unique ``x >= 0`` with ``V'(x) + F'(2x)/2 = 0`` and positive effective curvature.

    The curvature condition is ``V''(x) + (F''(0) + F''(2x))/2 > 0``.
    """
    Vp = V.poly if hasattr(V, "poly") else V
    Fp = _fpoly(F)
    dF = Fp.deriv()
    G = Vp.deriv() + 0.5 * dF.compose_scale(2.0)
    d2V, d2F = Vp.deriv(2), Fp.deriv(2)
    cands = []
    for r in real_roots(G):
        if r < -1e-9:
            continue
        r = 0.0 if abs(r) <= 1e-9 else r
        if d2V(r) + 0.5 * (d2F(0.0) + d2F(2.0 * r)) > 0:
            cands.append(r)
    if len(cands) != 1:
        raise NoAdmissibleRoot(f"expected one admissible root, found {cands}")
    return cands[0]


def symmetric_limit_energy(V, F) -> float:
    """``V(x0) + F(2 x0)/4``, the small-noise free energy of the symmetric branch."""
    x0 = find_x0(V, F)
    return float(V(x0) + 0.25 * _fpoly(F)(2.0 * x0))


@dataclass
class EnumerationReport:
    measures: list
    m3_status: str
    ordering_ok: bool
    failures: list = field(default_factory=list)
    energy_threshold: float | None = None

    def by_symmetry(self, kind: str) -> list:
        return [s for s in self.measures if s.symmetry == kind]

    def branch(self, kind: str) -> StationaryMeasure | None:
        found = self.by_symmetry(kind)
        return min(found, key=lambda s: s.free_energy.total) if found else None

    @property
    def count(self) -> int:
        """Seed-battery count: distinct measures reached, not a completeness claim."""
        return len(self.measures)


def seed_battery(V, F, K: int, extra=()) -> list[MomentVector]:
    """Gaussian bumps (std 0.2) at 0, +-x0, +-a, +-a/2 and the symmetric pair at +-x0."""
    a = V.a
    try:
        x0 = find_x0(V, F)
    except NoAdmissibleRoot:
        x0 = None
    centers = [0.0, a, -a, a / 2, -a / 2]
    if x0 is not None and x0 > 0:
        centers += [x0, -x0]
    seeds = [MomentVector.gaussian(c, SEED_STD, K) for c in centers]
    if x0 is not None and x0 > 0:
        g = MomentVector.gaussian(x0, SEED_STD, K).values
        pair = 0.5 * (g + g * (-1.0) ** np.arange(K + 1))
        pair[1::2] = 0.0
        seeds.append(MomentVector(pair))
    for s in extra:
        seeds.append(s if isinstance(s, MomentVector) else MomentVector.gaussian(float(s), SEED_STD, K))
    return seeds


def enumerate_stationary(V, F, eps: float, grid: Grid, cfg: FixedPointConfig = FixedPointConfig(),
                         extra_seeds=(), energy_threshold: float | None = None,
                         dedup: float = 1e-6, max_workers: int = 1) -> EnumerationReport:
    """Solve from every seed, deduplicate by moment distance and classify the result."""
    K = max(cfg.moment_order, _fpoly(F).degree, 1)
    seeds = seed_battery(V, F, K, extra_seeds)

    def solve(s):
        try:
            return fixed_point_solve(s, V, F, eps, grid, cfg)
        except DegenerateNormalization as exc:
            return exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(solve, seeds))
    else:
        results = [solve(s) for s in seeds]

    found: list[StationaryMeasure] = []
    failures = []
    for s, r in zip(seeds, results):
        if not isinstance(r, StationaryMeasure):
            failures.append((s, r))
            continue
        if r.eta_norm > cfg.eta_tol:
            failures.append((s, r))
            continue
        if all(moment_distance(r.moments, f.moments) >= dedup for f in found):
            found.append(r)
    order = {SYMMETRIC: 0, PLUS: 1, MINUS: 2}
    found.sort(key=lambda s: (order[s.symmetry], s.free_energy.total))
    ordering_ok = _ordering(found)
    status = _m3_status(found, ordering_ok, energy_threshold)
    return EnumerationReport(found, status, ordering_ok, failures, energy_threshold)


def _ordering(found) -> bool:
    sym = [s for s in found if s.symmetry == SYMMETRIC]
    plus = [s for s in found if s.symmetry == PLUS]
    minus = [s for s in found if s.symmetry == MINUS]
    if not (sym and plus and minus):
        return False
    fp = min(s.free_energy.total for s in plus)
    fm = min(s.free_energy.total for s in minus)
    f0 = min(s.free_energy.total for s in sym)
    return abs(fp - fm) <= 1e-9 and fp < f0


def _m3_status(found, ordering_ok: bool, threshold: float | None) -> str:
    kinds = sorted(s.symmetry for s in found)
    triple = sorted([SYMMETRIC, PLUS, MINUS])
    if kinds == triple and ordering_ok:
        return "M3"
    if threshold is not None:
        below = [s for s in found if s.free_energy.total <= threshold]
        if sorted(s.symmetry for s in below) == triple and _ordering(below):
            return "M3_prime"
    if kinds.count(SYMMETRIC) == 1:
        return "ZeroM1_only"
    return "other"
