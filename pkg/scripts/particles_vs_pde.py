"""Empirical moments of the particle system against the PDE moments."""
import argparse

from mckean_lab import GridDensity, SolverConfig, default_grid, evolve, validate_confining, validate_interaction
from mckean_lab.particles import ParticleConfig, run, sample_from_density


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=10_000)
    ap.add_argument("--eps", type=float, default=0.3)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--every", type=int, default=500)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    V = validate_confining([0, 0, -0.5, 0, 0.25])
    F = validate_interaction([0, 0, 0.25])
    u0 = GridDensity.gaussian(default_grid(V, args.eps, 801), 0.5, 0.3)
    p = run(ParticleConfig(args.N, args.eps, args.dt, args.t_end, seed=args.seed, record_every=args.every),
            V, F, positions=sample_from_density(u0, args.N, seed=args.seed))
    d = evolve(u0, SolverConfig(args.eps, args.dt, args.t_end, record_every=args.every,
                                detect_convergence=False), V, F)
    print(f"{'t':>6} {'m1 part':>10} {'m1 pde':>10} {'z':>6} {'m2 part':>10} {'m2 pde':>10} {'z':>6}")
    for t, pm, se, dm in zip(p.times, p.moments, p.stderr, d.moment_history):
        z1 = abs(pm[0] - dm.m1) / se[0]
        z2 = abs(pm[1] - dm.m2) / se[1]
        print(f"{t:6.2f} {pm[0]:10.5f} {dm.m1:10.5f} {z1:6.2f} {pm[1]:10.5f} {dm.m2:10.5f} {z2:6.2f}")


if __name__ == "__main__":
    main()
