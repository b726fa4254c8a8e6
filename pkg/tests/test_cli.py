import csv
import json
import xml.etree.ElementTree as ET

import pytest

from mckean_lab.cli import main, parse_config, run_subcommand
from mckean_lab.errors import ParseError, ValidationError
from mckean_lab.plotting import emit_svg

SVG = "{http://www.w3.org/2000/svg}"

MINIMAL = """\
V = [0, 0, -0.5, 0, 0.25]
F = [0, 0, 0.25]
eps = 0.1
"""

BASIN = MINIMAL + """
[solver]
dt = 0.01
t_end = 400.0
record_every = 50

[[experiment]]
name = "bump"
kind = "basin"
expected = "plus"
mean = 0.95
std = 0.1
checks = ["mean_positive", "upsilon_below_symmetric_limit"]
mirror = true
"""

FAST = """\
V = [0, 0, -0.5, 0, 0.25]
F = [0, 0, 0.25]
eps = 0.3
eps_list = [0.4, 0.2]
seed = 5

[grid]
n = 201

[solver]
dt = 0.01
t_end = 0.2
record_every = 5

[particles]
N = 200
dt = 0.01
t_end = 0.2
record_every = 5
cloud = true

[asymptotics]
n = 201
laplace_U = [0.25, 0, -0.5, 0, 0.25]
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def assert_rectangular(path):
    rows = read_csv(path)
    assert len(rows) >= 2
    assert all(len(r) == len(rows[0]) for r in rows)
    return rows


class TestParse:
    def test_minimal(self):
        cfg = parse_config(MINIMAL)
        assert cfg.eps == 0.1
        assert cfg.V.a == pytest.approx(1.0)
        assert cfg.F.lin
        assert cfg.seed == 0 and cfg.grid.n == 801

    def test_odd_coefficient(self):
        with pytest.raises(ValidationError) as ei:
            parse_config(MINIMAL.replace("[0, 0, -0.5, 0, 0.25]", "[0, 0.1, -0.5, 0, 0.25]"))
        assert ei.value.field == "V"
        assert "(V-1)" in str(ei.value)

    def test_missing_eps(self):
        with pytest.raises(ParseError):
            parse_config("V = [0, 0, -0.5, 0, 0.25]\nF = [0, 0, 0.25]\n")

    def test_unknown_key_has_line(self):
        with pytest.raises(ParseError) as ei:
            parse_config(MINIMAL + "\n[solver]\ndt = 0.1\nsteps = 5\n")
        assert ei.value.line == 7

    def test_unknown_table(self):
        with pytest.raises(ParseError):
            parse_config(MINIMAL + "\n[plots]\nwidth = 3\n")

    def test_malformed_text(self):
        with pytest.raises(ParseError) as ei:
            parse_config(MINIMAL + "grid = [\n")
        assert ei.value.line is not None

    def test_bad_types_and_values(self):
        with pytest.raises(ValidationError):
            parse_config(MINIMAL.replace("eps = 0.1", 'eps = "small"'))
        with pytest.raises(ValidationError):
            parse_config(MINIMAL.replace("eps = 0.1", "eps = -0.1"))
        with pytest.raises(ValidationError):
            parse_config(MINIMAL + "eps_list = [0.1, 0.2]\n")
        with pytest.raises(ValidationError):
            parse_config(BASIN.replace('expected = "plus"', 'expected = "up"'))

    def test_experiments(self):
        cfg = parse_config(BASIN)
        (e,) = cfg.experiments
        assert e.kind == "basin" and e.expected == "plus" and e.mirror
        assert e.initial.mean == 0.95


class TestSubcommands:
    def test_validate(self, capsys):
        assert run_subcommand("validate", parse_config(MINIMAL)) == 0
        out = capsys.readouterr().out
        for key in ("a = ", "m = ", "n = ", "x0 = ", "LIN = true", "SYN = false"):
            assert key in out

    def test_stationary(self, tmp_path):
        assert run_subcommand("stationary", parse_config(MINIMAL), tmp_path) == 0
        rows = assert_rectangular(tmp_path / "stationary.csv")
        assert rows[0] == ["symmetry", "m1", "m2", "free_energy", "residual", "eta_norm"]
        assert len(rows) == 4
        assert (tmp_path / "stationary_status.txt").read_text().strip() == "m3_status = M3"

    def test_basin(self, tmp_path):
        assert run_subcommand("basin", parse_config(BASIN), tmp_path) == 0
        lines = (tmp_path / "verdicts.jsonl").read_text().splitlines()
        verdicts = [json.loads(s) for s in lines]
        assert [v["matched_branch"] for v in verdicts] == ["plus", "minus"]
        assert all(v["passed"] and v["hypothesis_ok"] for v in verdicts)

    def test_basin_strict_failing_hypothesis(self, tmp_path):
        text = BASIN.replace('"upsilon_below_symmetric_limit"]', '"free_energy_below_hyperplane"]')
        assert run_subcommand("basin", parse_config(text), tmp_path, strict=True) == 1
        verdicts = [json.loads(s) for s in (tmp_path / "verdicts.jsonl").read_text().splitlines()]
        assert not verdicts[0]["hypothesis_ok"] and not verdicts[0]["passed"]

    def test_fast_commands_write_rectangular_csv(self, tmp_path):
        cfg = parse_config(FAST)
        for cmd in ("evolve", "particles", "asymptotics"):
            assert run_subcommand(cmd, cfg, tmp_path) == 0
        for name in ("trajectory.csv", "final_density.csv", "particles.csv", "particles_kde.csv",
                     "cloud.csv", "sweep.csv", "laplace.csv"):
            assert_rectangular(tmp_path / name)
        assert read_csv(tmp_path / "particles.csv")[0] == ["t", "m1", "m2", "m3", "m4", "upsilonN"]

    def test_byte_identical_outputs(self, tmp_path):
        cfg = parse_config(FAST)
        for d in ("a", "b"):
            for cmd in ("evolve", "particles"):
                assert run_subcommand(cmd, cfg, tmp_path / d) == 0
        for name in ("trajectory.csv", "final_density.csv", "particles.csv", "cloud.csv", "particles.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_particles(self, tmp_path):
        cfg = parse_config(FAST)
        run_subcommand("particles", cfg, tmp_path / "a")
        cfg.seed = 6
        run_subcommand("particles", cfg, tmp_path / "b")
        assert (tmp_path / "a" / "cloud.csv").read_bytes() != (tmp_path / "b" / "cloud.csv").read_bytes()

    def test_main_exit_codes(self, tmp_path, monkeypatch):
        cfg = tmp_path / "run.toml"
        cfg.write_text(FAST)
        assert main(["validate", "--config", str(cfg)]) == 0
        monkeypatch.setenv("MCKEAN_LAB_OUT", str(tmp_path / "env"))
        assert main(["evolve", "--config", str(cfg)]) == 0
        assert (tmp_path / "env" / "trajectory.csv").exists()
        assert main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "flag" / "trajectory.csv").exists()
        assert main(["particles", "--config", str(cfg), "--seed", str(2**64)]) == 2
        bad = tmp_path / "bad.toml"
        bad.write_text(FAST.replace("[0, 0, 0.25]", "[0, 0.1, 0.25]"))
        assert main(["validate", "--config", str(bad)]) == 2
        assert main(["validate", "--config", str(tmp_path / "missing.toml")]) == 2


class TestSvg:
    def test_evolve_plots(self, tmp_path):
        assert run_subcommand("evolve", parse_config(FAST), tmp_path) == 0
        root = ET.parse(tmp_path / "free_energy.svg").getroot()
        assert root.tag == SVG + "svg"
        lines = root.findall(f".//{SVG}polyline[@class='series']")
        assert len(lines) == 1
        ys = [float(p.split(",")[1]) for p in lines[0].get("points").split()]
        # SVG y grows downward, so a decreasing energy draws a nondecreasing y
        assert all(b >= a - 1e-9 for a, b in zip(ys, ys[1:]))
        snaps = ET.parse(tmp_path / "densities.svg").getroot()
        assert len(snaps.findall(f".//{SVG}polyline[@class='series']")) == 3
        assert snaps.find(f".//{SVG}g[@class='legend']") is not None

    def test_sweep_reference_lines(self, tmp_path):
        assert run_subcommand("asymptotics", parse_config(FAST), tmp_path) == 0
        root = ET.parse(tmp_path / "sweep.svg").getroot()
        assert len(root.findall(f".//{SVG}line[@class='reference']")) == 2
        text = "".join(root.itertext())
        assert "symmetric limit" in text and "asymmetric limit" in text

    def test_empty_series_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_svg([], tmp_path / "x.svg")
