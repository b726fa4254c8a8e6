"""Free energies of the stationary branches as the noise level shrinks."""
import argparse
from pathlib import Path

from mckean_lab import validate_confining, validate_interaction
from mckean_lab.asymptotics import free_energy_sweep
from mckean_lab.plotting import emit_svg
from mckean_lab.stationary import PLUS, SYMMETRIC


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05, 0.02])
    ap.add_argument("--n", type=int, default=1601)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()

    V = validate_confining([0, 0, -0.5, 0, 0.25])
    F = validate_interaction([0, 0, args.alpha / 2])
    rep = free_energy_sweep(V, F, args.eps, n=args.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "sweep.csv")
    a_lim, s_lim = rep.predicted_limits
    print(f"predicted limits: asymmetric {a_lim:.6f}, symmetric {s_lim:.6f}")
    print(f"{'eps':>8} {'fe_plus':>12} {'dist':>8} {'fe_sym':>12} {'dist':>8}")
    dp, ds = rep.distances(PLUS), rep.distances(SYMMETRIC)
    for i, e in enumerate(rep.eps_values):
        print(f"{e:8.3g} {rep.free_energies[PLUS][i]:12.6f} {dp[i]:8.4f} "
              f"{rep.free_energies[SYMMETRIC][i]:12.6f} {ds[i]:8.4f}")
    emit_svg([("symmetric", rep.eps_values, rep.free_energies[SYMMETRIC]),
              ("asymmetric", rep.eps_values, rep.free_energies[PLUS])], out / "sweep.svg",
             title=f"stationary free energies, alpha={args.alpha:g}", xlabel="eps", ylabel="free energy",
             hlines=[(s_lim, "symmetric limit"), (a_lim, "asymmetric limit")])


if __name__ == "__main__":
    main()
