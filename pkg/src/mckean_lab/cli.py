"""Command-line entry point: ``mckean-lab <subcommand> --config run.toml``.

A run is described by one TOML file.  Top-level keys hold the potentials,
noise level and seed; optional tables configure the grid, solver,
initial density, particles, stationary search, sweep and experiments.
Unknown keys are rejected.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import asymptotics, experiments, particles, pde, stationary
from .errors import (
    AssumptionError,
    BranchLost,
    HypothesisFailed,
    MckeanLabError,
    NoAdmissibleRoot,
    NoMatch,
    NonmonotoneEnergy,
    ParseError,
    ValidationError,
)
from .measures import Grid, GridDensity, default_grid, write_density_csv
from .plotting import emit_svg
from .potentials import (
    ConfiningPotential,
    InteractionPotential,
    synchronized,
    validate_confining,
    validate_interaction,
)

SUBCOMMANDS = ("validate", "stationary", "evolve", "particles", "asymptotics", "basin", "converge")
OUT_ENV = "MCKEAN_LAB_OUT"

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

# key -> (kind, default); default REQUIRED marks mandatory keys
REQUIRED = object()
NUM, INT, STR, BOOL, NUMS, ROWS, STRS = "number", "integer", "string", "boolean", "numbers", "rows", "strings"

TOP = {
    "V": (NUMS, REQUIRED), "F": (NUMS, REQUIRED), "eps": (NUM, None), "eps_list": (NUMS, None),
    "seed": (INT, 0), "out": (STR, "out"), "svg": (BOOL, True), "workers": (INT, 1),
}
TABLES = {
    "grid": {"L": (NUM, None), "n": (INT, 801)},
    "solver": {"dt": (NUM, 0.01), "t_end": (NUM, 10.0), "scheme": (STR, "semi_implicit"),
               "record_every": (INT, 10), "moment_ceiling": (NUM, math.inf),
               "eta_tol": (NUM, 1e-7), "energy_tol": (NUM, 1e-12)},
    "initial": {"kind": (STR, "gaussian"), "mean": (NUM, 0.5), "std": (NUM, 0.3), "components": (ROWS, None)},
    "particles": {"N": (INT, 10000), "dt": (NUM, 1e-3), "t_end": (NUM, 5.0), "record_every": (INT, 100),
                  "bandwidth": (STR, "silverman"), "cloud": (BOOL, False)},
    "stationary": {"energy_threshold": (NUM, None), "damping": (NUM, 0.5), "tol": (NUM, 1e-12),
                   "max_iter": (INT, 5000), "extra_seeds": (NUMS, ())},
    "asymptotics": {"n": (INT, 801), "laplace_U": (NUMS, None), "laplace_l": (INT, 2)},
}
EXPERIMENT = {"name": (STR, REQUIRED), "kind": (STR, "basin"), "expected": (STR, None),
              "checks": (STRS, ()), "mean": (NUM, None), "std": (NUM, 0.1), "components": (ROWS, None),
              "mirror": (BOOL, False)}


@dataclass(frozen=True)
class GridSpec:
    L: float | None = None
    n: int = 801


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "gaussian"
    mean: float = 0.5
    std: float = 0.3
    components: tuple | None = None

    def build(self, grid: Grid) -> GridDensity:
        if self.kind == "gaussian":
            return GridDensity.gaussian(grid, self.mean, self.std)
        return GridDensity.mixture(grid, [tuple(c) for c in self.components])


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    kind: str
    initial: InitialSpec
    expected: str | None = None
    checks: tuple = ()
    mirror: bool = False


@dataclass
class RunConfig:
    V: ConfiningPotential
    F: InteractionPotential
    eps: float | None
    eps_list: tuple | None = None
    seed: int = 0
    out: str = "out"
    svg: bool = True
    workers: int = 1
    grid: GridSpec = GridSpec()
    solver: dict = field(default_factory=dict)
    initial: InitialSpec = InitialSpec()
    particles: dict = field(default_factory=dict)
    stationary: dict = field(default_factory=dict)
    asymptotics: dict = field(default_factory=dict)
    experiments: list = field(default_factory=list)

    def make_grid(self, eps: float | None = None) -> Grid:
        eps = self.eps if eps is None else eps
        if self.grid.L is not None:
            return Grid.symmetric(self.grid.L, self.grid.n)
        return default_grid(self.V, eps, self.grid.n)

    def fixed_point(self) -> stationary.FixedPointConfig:
        s = self.stationary
        return stationary.FixedPointConfig(damping=s["damping"], tol=s["tol"], max_iter=s["max_iter"])


def _line_of(text: str, key: str, section: str | None = None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[\[?\s*([A-Za-z0-9_.\-]+)\s*\]\]?", line)
        if head:
            current = head.group(1)
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _coerce(kind: str, value, where: str):
    def bad():
        return ValidationError(where, f"expected {kind}, got {value!r}")

    def num(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise bad()
        return float(v)

    if kind == NUM:
        return num(value)
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad()
        return value
    if kind == STR:
        if not isinstance(value, str):
            raise bad()
        return value
    if kind == BOOL:
        if not isinstance(value, bool):
            raise bad()
        return value
    if not isinstance(value, list):
        raise bad()
    if kind == NUMS:
        return tuple(num(v) for v in value)
    if kind == STRS:
        if not all(isinstance(v, str) for v in value):
            raise bad()
        return tuple(value)
    rows = []
    for r in value:
        if not isinstance(r, list):
            raise bad()
        rows.append(tuple(num(v) for v in r))
    return tuple(rows)


def _section(text: str, raw: dict, schema: dict, name: str | None) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in schema:
            where = f"[{name}] " if name else ""
            raise ParseError(_line_of(text, key, name), f"unknown key {where}{key!r}")
    for key, (kind, default) in schema.items():
        fq = f"{name}.{key}" if name else key
        if key in raw:
            out[key] = _coerce(kind, raw[key], fq)
        elif default is REQUIRED:
            raise ParseError(None, f"missing required key {fq!r}")
        else:
            out[key] = default
    return out


def _initial(d: dict, where: str) -> InitialSpec:
    if d.get("components") is not None:
        comps = d["components"]
        if not comps or any(len(c) != 3 for c in comps):
            raise ValidationError(f"{where}.components", "each component is [weight, mean, std]")
        if any(c[0] <= 0 or c[2] <= 0 for c in comps):
            raise ValidationError(f"{where}.components", "weights and stds must be positive")
        return InitialSpec("mixture", 0.0, 1.0, comps)
    kind = d.get("kind", "gaussian") if where == "initial" else "gaussian"
    if kind not in ("gaussian", "mixture"):
        raise ValidationError(f"{where}.kind", f"unknown initial kind {kind!r}")
    if kind == "mixture":
        raise ValidationError(f"{where}.components", "mixture needs components")
    if d["mean"] is None:
        raise ValidationError(f"{where}.mean", "an initial mean or components are required")
    if not d["std"] > 0:
        raise ValidationError(f"{where}.std", "must be positive")
    return InitialSpec("gaussian", d["mean"], d["std"])


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run description.

    Raises ParseError for malformed text, unknown or missing keys, and
    ValidationError for values that violate a type or an assumption.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ParseError(line, getattr(exc, "msg", str(exc))) from None
    top_raw = {k: v for k, v in raw.items() if not isinstance(v, (dict, list)) or k in TOP}
    tables = {k: v for k, v in raw.items() if k not in top_raw}
    for k, v in tables.items():
        if k not in TABLES and k != "experiment":
            raise ParseError(_line_of(text, k) or _header_line(text, k), f"unknown key or table {k!r}")
    top = _section(text, top_raw, TOP, None)
    if top["eps"] is None and top["eps_list"] is None:
        raise ParseError(None, "missing required key 'eps'")
    try:
        V = validate_confining(top["V"])
    except AssumptionError as exc:
        raise ValidationError("V", f"violates {exc.assumption}: {exc}") from None
    try:
        F = validate_interaction(top["F"], allow_zero=True)
    except AssumptionError as exc:
        raise ValidationError("F", f"violates {exc.assumption}: {exc}") from None
    if top["eps"] is not None and not top["eps"] > 0:
        raise ValidationError("eps", "must be positive")
    if top["eps_list"] is not None:
        el = top["eps_list"]
        if not el or any(e <= 0 for e in el) or any(b >= a for a, b in zip(el, el[1:])):
            raise ValidationError("eps_list", "must be positive and strictly decreasing")
    if top["seed"] < 0 or top["seed"] >= 2**64:
        raise ValidationError("seed", "must fit in an unsigned 64-bit integer")
    sec = {name: _section(text, tables.get(name, {}), schema, name) for name, schema in TABLES.items()}
    if sec["grid"]["n"] < 16:
        raise ValidationError("grid.n", "need at least 16 nodes")
    if sec["solver"]["scheme"] not in pde.SCHEMES:
        raise ValidationError("solver.scheme", f"must be one of {pde.SCHEMES}")
    exps = []
    raw_exps = tables.get("experiment", [])
    if not isinstance(raw_exps, list):
        raise ParseError(_header_line(text, "experiment"), "experiments are declared as [[experiment]] tables")
    for i, e in enumerate(raw_exps):
        d = _section(text, e, EXPERIMENT, "experiment")
        where = f"experiment[{i}]"
        if d["kind"] not in ("basin", "converge"):
            raise ValidationError(f"{where}.kind", "must be 'basin' or 'converge'")
        if d["kind"] == "basin" and d["expected"] not in experiments.BRANCH_NAMES:
            raise ValidationError(f"{where}.expected", "must be one of sym, plus, minus")
        for c in d["checks"]:
            if c not in experiments.HYPOTHESES:
                raise ValidationError(f"{where}.checks", f"unknown hypothesis {c!r}")
        exps.append(ExperimentSpec(d["name"], d["kind"], _initial(d, where), d["expected"], d["checks"],
                                   d["mirror"]))
    return RunConfig(
        V=V, F=F, eps=top["eps"], eps_list=top["eps_list"], seed=top["seed"], out=top["out"],
        svg=top["svg"], workers=max(1, top["workers"]), grid=GridSpec(**sec["grid"]), solver=sec["solver"],
        initial=_initial(sec["initial"], "initial"), particles=sec["particles"],
        stationary=sec["stationary"], asymptotics=sec["asymptotics"], experiments=exps,
    )


def _header_line(text: str, name: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*\[\[?\s*{re.escape(name)}\s*\]\]?", line):
            return i
    return None


# ---------------------------------------------------------------- subcommands

def _need_eps(cfg: RunConfig) -> float:
    if cfg.eps is None:
        raise ValidationError("eps", "this subcommand needs a single eps")
    return cfg.eps


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _cmd_validate(cfg: RunConfig, out: Path, strict: bool) -> int:
    V, F = cfg.V, cfg.F
    try:
        x0 = f"{stationary.find_x0(V, F)!r}"
    except NoAdmissibleRoot as exc:
        x0 = f"none ({exc})"
    print(f"a = {V.a!r}")
    print(f"m = {V.m}")
    print(f"n = {F.n}")
    print(f"x0 = {x0}")
    print(f"LIN = {str(F.lin).lower()}")
    print(f"SYN = {str(synchronized(V, F)).lower()}")
    return EXIT_OK


def _cmd_stationary(cfg: RunConfig, out: Path, strict: bool) -> int:
    eps = _need_eps(cfg)
    grid = cfg.make_grid()
    rep = stationary.enumerate_stationary(cfg.V, cfg.F, eps, grid, cfg.fixed_point(),
                                          extra_seeds=cfg.stationary["extra_seeds"],
                                          energy_threshold=cfg.stationary["energy_threshold"],
                                          max_workers=cfg.workers)
    rows = [[s.symmetry, repr(s.moments.m1), repr(s.moments.m2), repr(s.free_energy.total),
             repr(s.residual), repr(s.eta_norm)] for s in rep.measures]
    _write_rows(out / "stationary.csv", ["symmetry", "m1", "m2", "free_energy", "residual", "eta_norm"], rows)
    (out / "stationary_status.txt").write_text(f"m3_status = {rep.m3_status}\n")
    for i, s in enumerate(rep.measures):
        write_density_csv(s.density, out / f"stationary_{i}_{s.symmetry}.csv")
    if cfg.svg and rep.measures:
        emit_svg([(s.symmetry, grid.x, s.density.values) for s in rep.measures], out / "stationary.svg",
                 title=f"stationary densities, eps={eps:g}", xlabel="x", ylabel="u")
    print(f"{rep.count} stationary measures; m3_status = {rep.m3_status}")
    return EXIT_OK


def _cmd_evolve(cfg: RunConfig, out: Path, strict: bool) -> int:
    eps = _need_eps(cfg)
    grid = cfg.make_grid()
    u0 = cfg.initial.build(grid)
    s = cfg.solver
    scfg = pde.SolverConfig(eps, s["dt"], s["t_end"], scheme=s["scheme"], record_every=s["record_every"],
                            eta_tol=s["eta_tol"], energy_tol=s["energy_tol"], moment_ceiling=s["moment_ceiling"])
    snaps = {}

    def snap(k, u):
        if k == max(1, scfg.n_steps // 10):
            snaps["early"] = (k * scfg.dt, u)

    status = EXIT_OK
    try:
        rec = pde.evolve(u0, scfg, cfg.V, cfg.F, callback=snap)
    except NonmonotoneEnergy as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    rec.write_csv(out / "trajectory.csv")
    write_density_csv(rec.final_density, out / "final_density.csv")
    if not pde.moment_ceiling_ok(rec, s["moment_ceiling"]):
        print("failed: recorded moments exceed the configured ceiling", file=sys.stderr)
        status = EXIT_FAILED
    if cfg.svg:
        emit_svg([("free energy", rec.times, rec.free_energy)], out / "free_energy.svg",
                 title="free energy along the flow", xlabel="t", ylabel="free energy")
        curves = [("u0", grid.x, u0.values)]
        if "early" in snaps:
            t, u = snaps["early"]
            curves.append((f"u at t={t:.3g}", grid.x, u.values))
        curves.append((f"u at t={rec.times[-1]:.3g}", grid.x, rec.final_density.values))
        emit_svg(curves, out / "densities.svg", title="density snapshots", xlabel="x", ylabel="u")
    print(f"{rec.status} after {rec.steps} steps; final free energy {rec.free_energy[-1]!r}")
    return status


def _cmd_particles(cfg: RunConfig, out: Path, strict: bool) -> int:
    eps = _need_eps(cfg)
    grid = cfg.make_grid()
    p = cfg.particles
    bw = p["bandwidth"]
    if bw != "silverman":
        try:
            bw = float(bw)
        except ValueError:
            raise ValidationError("particles.bandwidth", "'silverman' or a positive number") from None
    pcfg = particles.ParticleConfig(p["N"], eps, p["dt"], p["t_end"], seed=cfg.seed,
                                    record_every=p["record_every"], bandwidth=bw)
    rec = particles.run(pcfg, cfg.V, cfg.F, u0=cfg.initial.build(grid))
    rec.write_csv(out / "particles.csv")
    if p["cloud"]:
        rec.write_cloud_csv(out / "cloud.csv")
    write_density_csv(rec.kde, out / "particles_kde.csv")
    if cfg.svg:
        m = rec.moment_array()
        emit_svg([("m1", rec.times, m[:, 0]), ("m2", rec.times, m[:, 1])], out / "particles.svg",
                 title=f"empirical moments, N={pcfg.N}", xlabel="t", ylabel="moment")
    print(f"final m1 = {float(rec.moments[-1][0])!r}, m2 = {float(rec.moments[-1][1])!r}")
    return EXIT_OK


def _cmd_asymptotics(cfg: RunConfig, out: Path, strict: bool) -> int:
    eps_list = cfg.eps_list or (cfg.eps,)
    a = cfg.asymptotics
    try:
        rep = asymptotics.free_energy_sweep(cfg.V, cfg.F, eps_list, n=a["n"], cfg=cfg.fixed_point(), strict=strict)
    except BranchLost as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    rep.write_csv(out / "sweep.csv")
    for b in (stationary.SYMMETRIC, stationary.PLUS):
        flag = "monotone" if rep.monotone_approach(b) else "NOT monotone"
        print(f"{b}: distances {[float(f'{d:.4g}') for d in rep.distances(b)]} ({flag})")
    if a["laplace_U"] is not None:
        from .potentials import Polynomial

        U = Polynomial(a["laplace_U"])
        rows = []
        for e in eps_list:
            lr = asymptotics.laplace_report(U, e, ls=(a["laplace_l"],))
            rows.append([repr(e), repr(lr.ratios[a["laplace_l"]]), repr(lr.predicted(a["laplace_l"]))])
        _write_rows(out / "laplace.csv", ["eps", "ratio", "predicted"], rows)
    if cfg.svg:
        asym_lim, sym_lim = rep.predicted_limits[0], rep.predicted_limits[1]
        emit_svg([("symmetric", rep.eps_values, rep.free_energies[stationary.SYMMETRIC]),
                  ("asymmetric", rep.eps_values, rep.free_energies[stationary.PLUS])],
                 out / "sweep.svg", title="free energy of stationary branches", xlabel="eps",
                 ylabel="free energy", hlines=[(sym_lim, "symmetric limit"), (asym_lim, "asymmetric limit")])
    return EXIT_OK


def _experiment_list(cfg: RunConfig, kind: str) -> list[ExperimentSpec]:
    exps = [e for e in cfg.experiments if e.kind == kind]
    if not exps and kind == "converge":
        exps = [ExperimentSpec("converge", "converge", cfg.initial)]
    if not exps:
        raise ValidationError("experiment", f"no [[experiment]] of kind {kind!r}")
    return exps


def _run_batch(cfg: RunConfig, out: Path, strict: bool, kind: str) -> int:
    eps = _need_eps(cfg)
    grid = cfg.make_grid()
    report = stationary.enumerate_stationary(cfg.V, cfg.F, eps, grid, cfg.fixed_point(),
                                             extra_seeds=cfg.stationary["extra_seeds"])
    ecfg = experiments.ExperimentConfig(dt=cfg.solver["dt"], t_end=cfg.solver["t_end"],
                                        record_every=cfg.solver["record_every"],
                                        fixed_point=cfg.fixed_point())
    jobs = []
    for e in _experiment_list(cfg, kind):
        u0 = e.initial.build(grid)
        if kind == "basin":
            spec = experiments.BasinSpec(e.name, u0, e.expected, e.checks)
            jobs.append(spec)
            if e.mirror:
                jobs.append(spec.mirrored())
        else:
            jobs.append((e.name, u0))
            if e.mirror:
                jobs.append((e.name + "_mirror", u0.reflected()))

    def run(job):
        try:
            if kind == "basin":
                return experiments.verify_basin(job, cfg.V, cfg.F, eps, ecfg, report, strict=strict)
            name, u0 = job
            return experiments.verify_global_convergence(u0, cfg.V, cfg.F, eps, ecfg, report,
                                                          name=name, strict=strict)
        except (HypothesisFailed, NoMatch, NonmonotoneEnergy) as exc:
            return exc

    with ThreadPoolExecutor(cfg.workers) as pool:
        results = list(pool.map(run, jobs))
    status = EXIT_OK
    with open(out / "verdicts.jsonl", "w") as fh:
        for job, r in zip(jobs, results):
            name = job.name if kind == "basin" else job[0]
            if isinstance(r, Exception):
                rec = {"name": name, "hypothesis_ok": not isinstance(r, HypothesisFailed),
                       "matched_branch": None, "final_distance": None, "fe_limit": None, "passed": False}
                print(f"{name}: {r}", file=sys.stderr)
                status = EXIT_FAILED
            else:
                rec = r.to_json()
                for note in r.notes:
                    print(f"{name}: {note}", file=sys.stderr)
                if r.hypothesis_ok and not r.passed:
                    status = EXIT_FAILED
                if cfg.svg and r.distance_history:
                    t = [i * ecfg.record_every * ecfg.dt for i in range(len(r.distance_history))]
                    emit_svg([(f"sup distance to {rec['matched_branch'] or 'nearest'}", t, r.distance_history)],
                             out / f"{name}_distance.svg", title=name, xlabel="t", ylabel="sup distance")
            fh.write(json.dumps(rec) + "\n")
            print(json.dumps(rec))
    return status


def _cmd_basin(cfg, out, strict):
    return _run_batch(cfg, out, strict, "basin")


def _cmd_converge(cfg, out, strict):
    return _run_batch(cfg, out, strict, "converge")


COMMANDS = {
    "validate": _cmd_validate, "stationary": _cmd_stationary, "evolve": _cmd_evolve,
    "particles": _cmd_particles, "asymptotics": _cmd_asymptotics, "basin": _cmd_basin,
    "converge": _cmd_converge,
}


def run_subcommand(name: str, cfg: RunConfig, out: str | os.PathLike | None = None, strict: bool = False) -> int:
    """Run one subcommand; returns 0 (ok), 1 (experiment failed) or 2 (bad config)."""
    if name not in COMMANDS:
        print(f"unknown subcommand {name!r}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(out if out is not None else cfg.out)
    try:
        if name != "validate":
            out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[name](cfg, out_dir, strict)
    except (ParseError, ValidationError, AssumptionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MckeanLabError as exc:
        print(f"{name} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mckean-lab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="TOML run description")
    ap.add_argument("--out", help=f"output directory (overrides the config and ${OUT_ENV})")
    ap.add_argument("--seed", type=int, help="unsigned 64-bit seed, overrides the config")
    ap.add_argument("--strict", action="store_true", help="turn hypothesis and branch warnings into failures")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        cfg.seed = args.seed
    out = args.out or os.environ.get(OUT_ENV) or cfg.out
    return run_subcommand(args.subcommand, cfg, out, args.strict)


if __name__ == "__main__":
    sys.exit(main())
