"""Polynomial potentials: algebra, exact root isolation, assumption checks.

Confining potentials ``V`` and interaction potentials ``F`` are even
polynomials stored as ascending coefficient lists.  Every structural
assumption (parity, critical points, convexity, growth) is decided with
exact rational Sturm sequences, so a potential either passes the gate or is
rejected with the first violated condition.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .errors import (
    DegreeTooLow,
    GrowthBoundFails,
    MomentVectorTooShort,
    NonconvexSecondDerivative,
    NonzeroAtOrigin,
    NotConvex,
    OddCoefficient,
    WrongCriticalPoints,
)

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial with degree-ascending coefficients ``c0 + c1 x + ...``.

    Trailing zeros are stripped on construction, so the leading coefficient
    is nonzero unless the polynomial is the canonical zero ``(0.0,)``.
    """

    coeffs: tuple[float, ...]

    def __post_init__(self):
        cs = [float(c) for c in self.coeffs]
        if not cs:
            cs = [0.0]
        if not all(np.isfinite(cs)):
            raise ValueError("polynomial coefficients must be finite")
        while len(cs) > 1 and cs[-1] == 0.0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def is_even(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1::2])

    def is_odd(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[0::2])

    def __call__(self, x):
        """Horner evaluation; accepts scalars or numpy arrays."""
        acc = self.coeffs[-1] * np.ones_like(x, dtype=float) if np.ndim(x) else self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def deriv(self, k: int = 1) -> "Polynomial":
        if k < 0:
            raise ValueError("derivative order must be nonnegative")
        cs = list(self.coeffs)
        for _ in range(k):
            if len(cs) == 1:
                return Polynomial((0.0,))
            cs = [i * c for i, c in enumerate(cs)][1:]
        return Polynomial(tuple(cs))

    def _binary(self, other, op):
        if not isinstance(other, Polynomial):
            other = Polynomial((float(other),))
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return Polynomial(tuple(op(x, y) for x, y in zip(a, b)))

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Polynomial(tuple(-c for c in self.coeffs))

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(tuple(float(other) * c for c in self.coeffs))
        out = [0.0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(tuple(out))

    __rmul__ = __mul__

    def compose_scale(self, s: float) -> "Polynomial":
        """Return ``x -> p(s x)``."""
        return Polynomial(tuple(c * s**i for i, c in enumerate(self.coeffs)))

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)})"


def evaluate(p: Polynomial, x):
    return p(x)


def deriv(p: Polynomial, k: int = 1) -> Polynomial:
    return p.deriv(k)


# --------------------------------------------------------------------------
# exact Sturm machinery

def _exact(p: Polynomial) -> list[Fraction]:
    return [Fraction(c) for c in p.coeffs]


def _strip(cs: list[Fraction]) -> list[Fraction]:
    while len(cs) > 1 and cs[-1] == 0:
        cs = cs[:-1]
    return cs


def _rem(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    db = len(b) - 1
    lead = b[-1]
    while len(a) - 1 >= db and any(a):
        shift = len(a) - 1 - db
        q = a[-1] / lead
        for i, c in enumerate(b):
            a[i + shift] -= q * c
        a = _strip(a[:-1]) if len(a) > 1 else [Fraction(0)]
    return _strip(a) if a else [Fraction(0)]


def _eval_exact(cs: list[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(cs):
        acc = acc * x + c
    return acc


def sturm_sequence(p: Polynomial) -> list[list[Fraction]]:
    """Sturm chain ``p, p', -rem(p, p'), ...`` in exact arithmetic."""
    p0 = _exact(p)
    p1 = _strip([i * c for i, c in enumerate(p0)][1:] or [Fraction(0)])
    seq = [p0]
    if p1 == [0]:
        return seq
    seq.append(p1)
    while True:
        r = _rem(seq[-2], seq[-1])
        if r == [0]:
            break
        seq.append([-c for c in r])
    return seq


def _variations(seq: list[list[Fraction]], x: Fraction) -> int:
    signs = [v for v in (_eval_exact(s, x) for s in seq) if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def root_bound(p: Polynomial) -> float:
    """Cauchy bound: every real root satisfies ``|x| < 1 + max |c_i / c_d|``."""
    if p.degree < 1:
        return 1.0
    lead = abs(p.leading)
    return 1.0 + max(abs(c) / lead for c in p.coeffs[:-1])


def count_roots(p: Polynomial, lo: float, hi: float, seq=None) -> int:
    """Number of distinct real roots of ``p`` in ``(lo, hi]``."""
    if p.is_zero:
        raise ValueError("the zero polynomial has infinitely many roots")
    seq = seq if seq is not None else sturm_sequence(p)
    return _variations(seq, Fraction(lo)) - _variations(seq, Fraction(hi))


def real_roots(p: Polynomial, lo: float | None = None, hi: float | None = None,
               tol: float = ROOT_TOL) -> list[float]:
    """Distinct real roots of ``p`` in ``(lo, hi]``, sorted, each to width ``tol``.

    Isolation and refinement both use Sturm counts, so roots of even
    multiplicity (no sign change) are found as reliably as simple ones.
    """
    if p.is_zero:
        raise ValueError("the zero polynomial has infinitely many roots")
    if p.degree == 0:
        return []
    seq = sturm_sequence(p)
    R = Fraction(root_bound(p)) + 1
    a = -R if lo is None else Fraction(lo)
    b = R if hi is None else Fraction(hi)
    p0 = seq[0]

    def split(a: Fraction, b: Fraction) -> Fraction:
        m = (a + b) / 2
        # a split point that is itself a root would be counted ambiguously
        k = 3
        while _eval_exact(p0, m) == 0:
            m = a + (b - a) * Fraction(2**k + 1, 2 ** (k + 1))
            k += 1
        return m

    roots: list[float] = []
    stack = [(a, b, _variations(seq, a) - _variations(seq, b))]
    while stack:
        a, b, n = stack.pop()
        if n == 0:
            continue
        if _eval_exact(p0, b) == 0 and n == 1:
            roots.append(float(b))
            continue
        if n == 1 and b - a <= Fraction(tol):
            roots.append(_polish(p, float((a + b) / 2), float(a), float(b)))
            continue
        if b - a <= Fraction(tol) / 4:
            # a cluster narrower than tol is reported once per counted root
            roots.extend([float((a + b) / 2)] * n)
            continue
        m = split(a, b)
        nl = _variations(seq, a) - _variations(seq, m)
        stack.append((m, b, n - nl))
        stack.append((a, m, nl))
    return sorted(roots)


def _polish(p: Polynomial, x: float, lo: float, hi: float) -> float:
    """Float Newton steps inside an isolating bracket; never leaves it."""
    dp = p.deriv()
    best, fbest = x, abs(p(x))
    for _ in range(8):
        if fbest == 0.0:
            break
        d = dp(best)
        if d == 0.0:
            break
        cand = best - p(best) / d
        if not lo <= cand <= hi or abs(p(cand)) >= fbest:
            break
        best, fbest = cand, abs(p(cand))
    return best


def global_min(p: Polynomial, lo: float | None = None, hi: float | None = None) -> tuple[float, float]:
    """Return ``(argmin, min)`` of ``p`` over ``[lo, hi]`` (whole line if unbounded).

    On the whole line ``p`` must have even degree and positive leading term.
    """
    if lo is None or hi is None:
        if p.degree % 2 or p.leading <= 0:
            raise ValueError("polynomial is not bounded below")
    cands = [] if p.degree == 0 else real_roots(p.deriv(), lo, hi)
    if lo is not None:
        cands.append(float(lo))
    if hi is not None:
        cands.append(float(hi))
    if not cands:
        cands = [0.0]
    vals = [float(p(x)) for x in cands]
    i = int(np.argmin(vals))
    return cands[i], vals[i]


def is_nonnegative(p: Polynomial, tol: float = 1e-12) -> bool:
    """True if ``p >= -tol * scale`` on the whole real line."""
    if p.is_zero:
        return True
    if p.degree == 0:
        return p.leading >= 0
    if p.degree % 2 or p.leading < 0:
        return False
    _, m = global_min(p)
    scale = max(1.0, max(abs(c) for c in p.coeffs))
    return m >= -tol * scale


# --------------------------------------------------------------------------
# validated potentials

@dataclass(frozen=True)
class ConfiningPotential:
    poly: Polynomial
    a: float
    m: int
    growth: tuple[float, float]  # (C4, C2) witness for V >= C4 x^4 - C2 x^2

    def __call__(self, x):
        return self.poly(x)

    def deriv(self, k: int = 1) -> Polynomial:
        return self.poly.deriv(k)


@dataclass(frozen=True)
class InteractionPotential:
    poly: Polynomial
    n: int
    lin: bool
    curvature_at_zero: float  # F''(0)

    def __call__(self, x):
        return self.poly(x)

    def deriv(self, k: int = 1) -> Polynomial:
        return self.poly.deriv(k)

    @classmethod
    def zero(cls) -> "InteractionPotential":
        """The trivial interaction ``F = 0`` (outside (F-1), used for linear baselines)."""
        return cls(Polynomial((0.0,)), 0, True, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.poly.is_zero


def _as_poly(coeffs) -> Polynomial:
    if isinstance(coeffs, Polynomial):
        return coeffs
    coeffs = list(coeffs)
    if not coeffs:
        raise ValueError("coefficient list must be nonempty")
    return Polynomial(tuple(coeffs))


def _growth_witness(V: Polynomial) -> tuple[float, float]:
    """Exhibit ``C4, C2 > 0`` with ``V(x) >= C4 x^4 - C2 x^2`` for all ``x``."""
    if V.degree < 4 or V.leading <= 0:
        raise GrowthBoundFails("leading term cannot dominate C4 x^4")
    if V.coeffs[0] < 0:
        raise GrowthBoundFails("V(0) < 0 violates the bound at the origin")
    C4 = V.leading / 2.0
    # V = c0 + x^2 P(x^2); need P(s) - C4 s + C2 >= 0 for s >= 0
    P = Polynomial(tuple(V.coeffs[2::2]))
    q = P - Polynomial((0.0, C4))
    # past the root bound of q' the polynomial q is increasing
    hi = root_bound(q.deriv()) + 1.0 if q.degree > 1 else 1.0
    _, qmin = global_min(q, 0.0, hi)
    C2 = max(-qmin, 0.0) + 1e-3
    if not is_nonnegative(V - Polynomial((0.0, 0.0, -C2, 0.0, C4))):
        raise GrowthBoundFails(f"witness C4={C4}, C2={C2} does not hold")
    return C4, C2


def validate_confining(coeffs) -> ConfiningPotential:
    """Check the confining potential assumptions and locate the well ``a``.

    Raises the first violated condition in the order
    parity, critical points, degree, growth, V'' > 0 beyond a,
    convexity of V'', and V(0) = 0.  Polynomials of degree below 2 are
    rejected as ``DegreeTooLow`` before the critical-point count, since
    their derivative has no isolated roots.
    """
    V = _as_poly(coeffs)
    if not V.is_even():
        raise OddCoefficient("V must be even (all odd coefficients zero)", "(V-1)")
    if V.degree < 2:
        raise DegreeTooLow(f"deg V = {V.degree} < 4", "(V-1)")
    dV = V.deriv()
    crit = real_roots(dV)
    d2V = V.deriv(2)
    pos = [r for r in crit if r > 0]
    if len(crit) != 3 or len(pos) != 1:
        raise WrongCriticalPoints(f"V' has {len(crit)} real roots, expected exactly three")
    a = pos[0]
    # refine to the exact symmetric triple -a, 0, a
    if not (abs(crit[1]) <= ROOT_TOL and abs(crit[0] + a) <= 10 * ROOT_TOL):
        raise WrongCriticalPoints("critical points are not of the form -a, 0, a")
    if not d2V(a) > 0 or not d2V(0.0) < 0:
        raise WrongCriticalPoints(
            f"curvature signs wrong: V''(a)={d2V(a):.3g}, V''(0)={d2V(0.0):.3g}")
    if V.degree < 4:
        raise DegreeTooLow(f"deg V = {V.degree} < 4", "(V-1)")
    C4, C2 = _growth_witness(V)
    if d2V.degree < 1 or d2V.leading <= 0 or count_roots(d2V, a, root_bound(d2V) + 1.0) != 0:
        raise NonconvexSecondDerivative("V'' must stay positive on [a, inf)", "(V-4)")
    if not is_nonnegative(V.deriv(4)):
        raise NonconvexSecondDerivative("V'' is not convex", "(V-5)")
    if V.coeffs[0] != 0.0:
        raise NonzeroAtOrigin(f"V(0) = {V.coeffs[0]} != 0", "(V-6)")
    return ConfiningPotential(V, a, V.degree // 2, (C4, C2))


def validate_interaction(coeffs, allow_zero: bool = False) -> InteractionPotential:
    """Check the interaction assumptions; report (LIN) and F''(0)."""
    F = _as_poly(coeffs)
    if allow_zero and F.is_zero:
        return InteractionPotential.zero()
    if not F.is_even():
        raise OddCoefficient("F must be even (all odd coefficients zero)", "(F-1)")
    if F.degree < 2:
        raise DegreeTooLow(f"deg F = {F.degree} < 2", "(F-1)")
    if not is_nonnegative(F.deriv(2)):
        raise NotConvex("F is not convex")
    if not is_nonnegative(F.deriv(4)):
        raise NotConvex("F'' is not convex")
    if F.coeffs[0] != 0.0:
        raise NonzeroAtOrigin(f"F(0) = {F.coeffs[0]} != 0", "(F-3)")
    return InteractionPotential(F, F.degree // 2, F.degree == 2, float(F.deriv(2)(0.0)))


def synchronized(V: ConfiningPotential, F: InteractionPotential) -> bool:
    """(SYN): V''(0) + F''(0) > 0."""
    return float(V.deriv(2)(0.0)) + F.curvature_at_zero > 0


# --------------------------------------------------------------------------
# convolution against a measure given by its moments

def convolve_with_moments(F, moments: Sequence[float]) -> Polynomial:
    """Polynomial ``x -> int F(x - y) du(y)`` from the moments ``m_k`` of ``u``.

    ``F`` may be a Polynomial or an InteractionPotential; ``moments[k]`` is
    ``int y^k du(y)`` and must reach ``deg F``.  ``moments[0]`` is used as
    given (it is the mass).
    """
    p = F.poly if isinstance(F, InteractionPotential) else F
    m = np.asarray(getattr(moments, "values", moments), dtype=float)
    d = p.degree
    if p.is_zero:
        return Polynomial((0.0,))
    if len(m) < d + 1:
        raise MomentVectorTooShort(f"need moments up to order {d}, got {len(m) - 1}")
    out = [0.0] * (d + 1)
    for k, c in enumerate(p.coeffs):
        if c == 0.0:
            continue
        for j in range(k + 1):
            # (x - y)^k = sum_j C(k, j) x^j (-y)^(k-j)
            out[j] += c * comb(k, j) * (-1) ** (k - j) * m[k - j]
    return Polynomial(tuple(out))
