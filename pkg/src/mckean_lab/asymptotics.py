"""Small-noise asymptotics: Laplace moment ratios and free-energy sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchLost, GrowthPreconditionFails
from .measures import default_grid, moment_distance
from .potentials import InteractionPotential, Polynomial, global_min, real_roots
from .stationary import MINUS, PLUS, SYMMETRIC, FixedPointConfig, enumerate_stationary, find_x0

# integrand below exp(-LOG_CUTOFF) relative to its peak is dropped
LOG_CUTOFF = 750.0
GL_NODES = 20
REL_TOL = 1e-12


def _check_growth(U: Polynomial) -> None:
    if U.degree < 2 or U.degree % 2 or U.leading <= 0:
        raise GrowthPreconditionFails(
            "U must be coercive (even degree >= 2, positive leading coefficient)")


def _support_radius(U: Polynomial, eps: float, umin: float) -> float:
    level = Polynomial((umin + LOG_CUTOFF * eps / 2.0,))
    roots = real_roots(U - level)
    return max(abs(r) for r in roots) * (1 + 1e-9) if roots else 1.0


def _half_line_nodes(R: float, panels: int):
    t, w = np.polynomial.legendre.leggauss(GL_NODES)
    edges = np.linspace(0.0, R, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * np.diff(edges)[:, None]
    return (mid + half * t).ravel(), (half * w).ravel()


def _moment_integrals(U: Polynomial, eps: float, ls, R: float, umin: float, panels: int) -> np.ndarray:
    """``int x^l exp(-(2/eps)(U - umin))`` over ``[-R, R]`` for each ``l``.

    Nodes are mirrored: the ``+x`` and ``-x`` contributions are added in
    pairs, so odd integrands of an even ``U`` cancel exactly.
    """
    x, w = _half_line_nodes(R, panels)
    ep = np.exp(-(2.0 / eps) * (U(x) - umin))
    en = np.exp(-(2.0 / eps) * (U(-x) - umin))
    out = []
    for l in ls:
        out.append(float(np.dot(w, x**l * (ep + en if l % 2 == 0 else ep - en))))
    return np.array(out)


def _integrals(U: Polynomial, eps: float, ls) -> np.ndarray:
    _check_growth(U)
    if not eps > 0:
        raise ValueError("eps must be positive")
    _, umin = global_min(U)
    R = _support_radius(U, eps, umin)
    panels = 16
    prev = _moment_integrals(U, eps, ls, R, umin, panels)
    while panels < 2**15:
        panels *= 2
        cur = _moment_integrals(U, eps, ls, R, umin, panels)
        floor = abs(cur[0]) * max(R, 1.0) ** np.asarray(ls, dtype=float) * 1e-15
        if np.all(np.abs(cur - prev) <= REL_TOL * np.abs(cur) + floor):
            return cur
        prev = cur
    return prev


def laplace_ratio(U: Polynomial, eps: float, l: int) -> float:
    """``int x^l e^{-2U/eps} / int e^{-2U/eps}`` by adaptive composite Gauss-Legendre."""
    I0, Il = _integrals(U, eps, [0, l])
    return float(Il / I0)


def extract_minima(U: Polynomial, tol: float = 1e-9) -> list[float]:
    """Global minimum locations of a coercive ``U`` (values within ``tol`` of the minimum)."""
    _check_growth(U)
    crit = real_roots(U.deriv())
    vals = [float(U(c)) for c in crit]
    vmin = min(vals)
    return [c for c, v in zip(crit, vals) if v - vmin <= tol]


@dataclass
class LaplaceReport:
    minima: list
    weights: list
    ratios: dict
    eps: float

    def predicted(self, l: int) -> float:
        return float(sum(p * a**l for p, a in zip(self.weights, self.minima)))


def laplace_report(U: Polynomial, eps: float, ls=(1, 2, 3, 4), tol: float = 1e-9) -> LaplaceReport:
    """Ratios at ``eps`` and the observed mass fraction of each minimum's Voronoi cell."""
    from scipy.integrate import quad

    A = extract_minima(U, tol)
    ratios = {l: laplace_ratio(U, eps, l) for l in ls}
    _, umin = global_min(U)
    R = _support_radius(U, eps, umin)
    cuts = [-R] + [0.5 * (a + b) for a, b in zip(A, A[1:])] + [R]

    def f(x):
        return math.exp(-(2.0 / eps) * (float(U(x)) - umin))

    mass = [quad(f, lo, hi, points=[a] if lo < a < hi else None, epsabs=0, epsrel=1e-12, limit=500)[0]
            for lo, hi, a in zip(cuts, cuts[1:], A)]
    total = sum(mass)
    return LaplaceReport(A, [m / total for m in mass], ratios, eps)


@dataclass
class SweepReport:
    eps_values: list
    free_energies: dict          # branch -> list of free energies (nan once lost)
    moments: dict                # branch -> list of moment vectors (None once lost)
    predicted_limits: tuple      # (V(a), V(x0) + F(2 x0)/4)
    lost: dict = field(default_factory=dict)

    def distances(self, branch: str) -> np.ndarray:
        target = self.predicted_limits[1] if branch == SYMMETRIC else self.predicted_limits[0]
        return np.abs(np.asarray(self.free_energies[branch]) - target)

    def monotone_approach(self, branch: str) -> bool:
        d = self.distances(branch)
        return bool(np.all(np.isfinite(d)) and np.all(np.diff(d) <= 0))

    def ordering_holds(self) -> bool:
        fp = np.asarray(self.free_energies[PLUS])
        f0 = np.asarray(self.free_energies[SYMMETRIC])
        return bool(np.all(fp < f0))

    def write_csv(self, path) -> None:
        import csv

        a_lim, s_lim = self.predicted_limits
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "fe_sym", "fe_plus", "fe_minus",
                        "predicted_sym_limit", "predicted_asym_limit"])
            for i, e in enumerate(self.eps_values):
                w.writerow([repr(float(e))] + [repr(float(self.free_energies[b][i]))
                                               for b in (SYMMETRIC, PLUS, MINUS)]
                           + [repr(float(s_lim)), repr(float(a_lim))])


def free_energy_sweep(V, F, eps_list, n: int = 801, cfg: FixedPointConfig = FixedPointConfig(),
                      strict: bool = False) -> SweepReport:
    """Track the three branches across decreasing ``eps`` by nearest-moment matching."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps values must be strictly decreasing")
    Fp = F.poly if isinstance(F, InteractionPotential) else F
    x0 = find_x0(V, F)
    limits = (float(V(V.a)), float(V(x0) + 0.25 * Fp(2.0 * x0)))
    branches = (SYMMETRIC, PLUS, MINUS)
    fes = {b: [] for b in branches}
    moms = {b: [] for b in branches}
    lost: dict = {}
    for eps in eps_list:
        rep = enumerate_stationary(V, F, eps, default_grid(V, eps, n), cfg)
        for b in branches:
            cands = rep.by_symmetry(b)
            prev = moms[b][-1] if moms[b] else None
            if b in lost or not cands:
                lost.setdefault(b, eps)
                if strict:
                    raise BranchLost(b, eps)
                fes[b].append(math.nan)
                moms[b].append(None)
                continue
            if prev is not None:
                best = min(cands, key=lambda s: moment_distance(s.moments, prev))
            else:
                best = min(cands, key=lambda s: s.free_energy.total)
            fes[b].append(best.free_energy.total)
            moms[b].append(best.moments)
    return SweepReport(eps_list, fes, moms, limits, lost)
