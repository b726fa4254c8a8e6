"""Euler-Maruyama simulation of the N-particle mean-field system.

Each particle feels ``-V'(x_i) - (1/N) sum_j F'(x_i - x_j)``.  Since ``F'``
is a polynomial, the pair sum is a polynomial in ``x_i`` whose coefficients
are the empirical power sums ``S_k = (1/N) sum_j x_j^k``; one drift
evaluation therefore costs ``O(N deg F)`` instead of ``O(N^2)``.

Noise comes from a Philox counter-based generator keyed by the run seed.
Step ``k`` draws from counter block ``k``, so increments are a pure function
of ``(seed, step)`` and do not depend on how work is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBlowup
from .measures import Grid, GridDensity
from .potentials import InteractionPotential, Polynomial, convolve_with_moments

INIT_STREAM = 1
NOISE_STREAM = 0


def _fpoly(F) -> Polynomial:
    return F.poly if isinstance(F, InteractionPotential) else F


def _vpoly(V) -> Polynomial:
    return V.poly if hasattr(V, "poly") else V


def generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """Philox generator for ``(seed, stream, block)``; blocks never overlap."""
    bg = np.random.Philox(key=int(seed) % 2**64, counter=[0, int(block) % 2**64, int(stream), 0])
    return np.random.Generator(bg)


def power_sums(x: np.ndarray, K: int) -> np.ndarray:
    """Empirical moments ``(1/N) sum x^k`` for ``k = 0..K``."""
    out = np.empty(K + 1)
    p = np.ones_like(x)
    out[0] = 1.0
    for k in range(1, K + 1):
        p = p * x
        out[k] = p.mean()
    return out


def interaction_drift(x: np.ndarray, F) -> np.ndarray:
    """``(1/N) sum_j F'(x_i - x_j)`` via power sums, self term included."""
    dF = _fpoly(F).deriv()
    if dF.is_zero:
        return np.zeros_like(x)
    return convolve_with_moments(dF, power_sums(x, dF.degree))(x)


def interaction_drift_pairwise(x: np.ndarray, F) -> np.ndarray:
    """Direct ``O(N^2)`` reference for :func:`interaction_drift`."""
    dF = _fpoly(F).deriv()
    return np.array([np.mean(dF(xi - x)) for xi in x])


def drift_all(x, V, F) -> np.ndarray:
    """``-V'(x_i) - (1/N) sum_j F'(x_i - x_j)`` for every particle."""
    x = np.asarray(x, dtype=float)
    return -_vpoly(V).deriv()(x) - interaction_drift(x, F)


def upsilon_N_pairwise(x, V, F) -> float:
    """Exact double sum ``(1/N) sum V(x_j) + (1/2N^2) sum_i sum_j F(x_i - x_j)``."""
    x = np.asarray(x, dtype=float)
    Fp = _fpoly(F)
    N = len(x)
    inter = 0.0
    for start in range(0, N, 512):
        blk = x[start:start + 512]
        inter += float(np.sum(Fp(blk[:, None] - x[None, :])))
    return float(np.mean(_vpoly(V)(x))) + inter / (2.0 * N * N)


def upsilon_N_power(x, V, F) -> float:
    """Same value through power sums, ``O(N deg F)``."""
    x = np.asarray(x, dtype=float)
    Fp = _fpoly(F)
    conf = float(np.mean(_vpoly(V)(x)))
    if Fp.is_zero:
        return conf
    conv = convolve_with_moments(Fp, power_sums(x, Fp.degree))
    return conf + 0.5 * float(np.mean(conv(x)))


def upsilon_N(x, V, F, exact_limit: int = 4096) -> float:
    """Discrete potential of a configuration; exact double sum for small ``N``."""
    if len(x) <= exact_limit:
        return upsilon_N_pairwise(x, V, F)
    return upsilon_N_power(x, V, F)


@dataclass(frozen=True)
class ParticleConfig:
    N: int
    eps: float
    dt: float
    t_end: float
    seed: int = 0
    record_every: int = 1
    guard: float = 1e6
    bandwidth: str | float = "silverman"

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least two particles")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True, eq=False)
class ParticleState:
    positions: np.ndarray
    t: float = 0.0
    step: int = 0
    seed: int = 0

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise ValueError("need at least two particles")
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        x.flags.writeable = False
        object.__setattr__(self, "positions", x)

    @property
    def rng_state(self) -> tuple[int, int]:
        return (self.seed, self.step)


def em_step(state: ParticleState, cfg: ParticleConfig, V, F) -> ParticleState:
    x = state.positions
    b = drift_all(x, V, F)
    new = x + cfg.dt * b
    if cfg.eps > 0:
        xi = generator(state.seed, NOISE_STREAM, state.step).standard_normal(len(x))
        new = new + np.sqrt(cfg.eps * cfg.dt) * xi
    if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > cfg.guard:
        raise NumericalBlowup(f"particle left |x| <= {cfg.guard:g} at step {state.step + 1}")
    return ParticleState(new, state.t + cfg.dt, state.step + 1, state.seed)


def sample_from_density(u: GridDensity, N: int, seed: int) -> np.ndarray:
    """Inverse-CDF sampling: cumulative trapezoid plus linear interpolation."""
    x = u.grid.x
    v = u.values
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * u.grid.dx)])
    cdf /= cdf[-1]
    q = generator(seed, INIT_STREAM, 0).random(N)
    # flat stretches of the CDF (u = 0) must not trap the interpolation
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(q, cdf[keep], x[keep])


def silverman_bandwidth(x: np.ndarray) -> float:
    n = len(x)
    sd = np.std(x, ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def kde_density(x: np.ndarray, grid: Grid, bandwidth: str | float = "silverman") -> GridDensity:
    h = silverman_bandwidth(x) if bandwidth == "silverman" else float(bandwidth)
    out = np.zeros(grid.n)
    for start in range(0, len(x), 2048):
        blk = x[start:start + 2048]
        out += np.exp(-0.5 * ((grid.x[:, None] - blk[None, :]) / h) ** 2).sum(axis=1)
    out /= len(x) * h * np.sqrt(2 * np.pi)
    return GridDensity(grid, out).normalized()


@dataclass
class ParticleRecord:
    times: list = field(default_factory=list)
    moments: list = field(default_factory=list)      # (m1, m2, m3, m4) per record
    stderr: list = field(default_factory=list)       # Monte-Carlo standard errors of m1, m2
    upsilon: list = field(default_factory=list)
    final_state: ParticleState | None = None
    kde: GridDensity | None = None

    def append(self, state: ParticleState, V, F):
        x = state.positions
        N = len(x)
        p = power_sums(x, 4)
        self.times.append(state.t)
        self.moments.append(p[1:].copy())
        self.stderr.append((float(np.std(x, ddof=1) / np.sqrt(N)),
                            float(np.std(x * x, ddof=1) / np.sqrt(N))))
        self.upsilon.append(upsilon_N_power(x, V, F))

    def moment_array(self) -> np.ndarray:
        return np.array(self.moments)

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "m1", "m2", "m3", "m4", "upsilonN"])
            for t, m, ups in zip(self.times, self.moments, self.upsilon):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in m] + [repr(float(ups))])

    def write_cloud_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"])
            for xi in self.final_state.positions:
                w.writerow([repr(float(xi))])


def run(cfg: ParticleConfig, V, F, u0: GridDensity | None = None, positions=None,
        kde_grid: Grid | None = None) -> ParticleRecord:
    """Simulate from ``u0`` (sampled by inverse CDF) or from explicit ``positions``."""
    if positions is None:
        if u0 is None:
            raise ValueError("give an initial density or explicit positions")
        positions = sample_from_density(u0, cfg.N, cfg.seed)
    state = ParticleState(positions, 0.0, 0, cfg.seed)
    if len(state.positions) != cfg.N:
        raise ValueError("number of positions does not match cfg.N")
    rec = ParticleRecord()
    rec.append(state, V, F)
    n = cfg.n_steps
    for k in range(1, n + 1):
        state = em_step(state, cfg, V, F)
        if k % cfg.record_every == 0 or k == n:
            rec.append(state, V, F)
    rec.final_state = state
    grid = kde_grid if kde_grid is not None else (u0.grid if u0 is not None else None)
    if grid is not None:
        rec.kde = kde_density(state.positions, grid, cfg.bandwidth)
    return rec
