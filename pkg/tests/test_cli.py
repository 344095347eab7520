import csv

import numpy as np
import pytest

from doublecal import cli
from doublecal.design import Design, SampleDraw, draw_srswor
from doublecal.diagnostics import approximate_expectation
from doublecal.frame import compute_totals, export_csv
from doublecal.simgen import ScenarioConfig, generate_population
from doublecal.variance import estimate


@pytest.fixture
def population():
    return generate_population(ScenarioConfig(n_total=800, n_b=600, n_resp=250), 17).frame


def write_sample(tmp_path, frame, indices):
    rows = frame.b_rows[indices]
    path = tmp_path / "sample.csv"
    export_csv(frame.subset(rows), path)
    return path


def write_config(tmp_path, **values):
    path = tmp_path / "run.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
    return path


def parse_csv_output(text):
    rows = list(csv.DictReader(text.splitlines()))
    assert len(rows) == 1
    return rows[0]


def supplied_totals(frame):
    t = compute_totals(frame)
    return " ".join(repr(float(v)) for v in t.t_x_b[1:]), " ".join(repr(float(v)) for v in t.t_z[1:])


def test_estimate_matches_library(tmp_path, capsys, population):
    draw = draw_srswor(population.n_b, 60, np.random.default_rng(8))
    sample = write_sample(tmp_path, population, draw.indices)
    t_x, t_z = supplied_totals(population)
    cfg = write_config(
        tmp_path, input=sample.name, x_columns="x1", z_columns="z1", n_b=600, n=60,
        n_total=800, t_x_b=t_x, t_z=t_z, format="csv",
    )
    assert cli.run(["estimate", "--config", str(cfg)]) == 0
    out = parse_csv_output(capsys.readouterr().out)
    lib = estimate(population, draw, Design.srswor(600, 60), compute_totals(population))
    assert float(out["total"]) == lib.total
    assert float(out["variance"]) == lib.variance
    assert float(out["ci_low"]) == lib.ci_low and float(out["ci_high"]) == lib.ci_high


def test_estimate_missing_t_z(tmp_path, capsys, population):
    sample = write_sample(tmp_path, population, np.arange(40))
    cfg = write_config(tmp_path, input=sample.name, x_columns="x1", z_columns="z1", n_b=600, t_x_b="1.0")
    assert cli.run(["estimate", "--config", str(cfg)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "error[config]" in err and "'t_z'" in err


def test_estimate_census_interval_degenerate(tmp_path, capsys):
    gen = generate_population(ScenarioConfig(n_total=300, n_b=300, n_resp=300), 2)
    pop = gen.frame
    sample = write_sample(tmp_path, pop, np.arange(300))
    t_x, t_z = supplied_totals(pop)
    cfg = write_config(
        tmp_path, input=sample.name, x_columns="x1", z_columns="z1", design="census", n_b=300,
        n_total=300, t_x_b=t_x, t_z=t_z, format="csv",
    )
    assert cli.run(["estimate", "--config", str(cfg)]) == 0
    out = parse_csv_output(capsys.readouterr().out)
    truth = float(pop.y.sum())
    assert float(out["variance"]) == 0.0
    assert float(out["ci_low"]) == float(out["ci_high"]) == float(out["total"])
    assert float(out["total"]) == pytest.approx(truth, rel=1e-12)


def test_estimate_explicit_design(tmp_path, capsys, population):
    draw = draw_srswor(population.n_b, 30, np.random.default_rng(1))
    sample = write_sample(tmp_path, population, draw.indices)
    ids = [str(population.ids[population.b_rows[i]]) for i in draw.indices]
    with open(sample) as fh:
        rows = list(csv.DictReader(fh))
    pi, pjh = 30 / 600, 30 * 29 / (600 * 599)
    with open(sample, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) + ["pi"])
        w.writeheader()
        for r in rows:
            w.writerow({**r, "pi": repr(pi)})
    joint = tmp_path / "joint.csv"
    with open(joint, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id_a", "id_b", "pi_joint"])
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                w.writerow([ids[a], ids[b], repr(pjh)])
    t_x, t_z = supplied_totals(population)
    cfg = write_config(
        tmp_path, input=sample.name, x_columns="x1", z_columns="z1", design="explicit",
        pi_column="pi", pi_joint_path=joint.name, n_b=600, n_total=800, t_x_b=t_x, t_z=t_z, format="csv",
    )
    assert cli.run(["estimate", "--config", str(cfg)]) == 0
    out = parse_csv_output(capsys.readouterr().out)
    lib = estimate(population, draw, Design.srswor(600, 30), compute_totals(population))
    assert float(out["total"]) == pytest.approx(lib.total, rel=1e-12)
    assert float(out["variance"]) == pytest.approx(lib.variance, rel=1e-9)


def test_explicit_design_missing_pair(tmp_path, capsys):
    sample = tmp_path / "s.csv"
    sample.write_text("id,y,in_b,r,x1,z1,pi\na,1,1,1,1,2,0.5\nb,2,1,1,2,1,0.5\nc,3,1,0,3,3,0.5\n")
    (tmp_path / "j.csv").write_text("id_a,id_b,pi_joint\na,b,0.2\na,c,0.2\n")
    cfg = write_config(
        tmp_path, input="s.csv", x_columns="x1", z_columns="z1", design="explicit", pi_column="pi",
        pi_joint_path="j.csv", n_b=6, n_total=8, t_x_b="10", t_z="12",
    )
    assert cli.run(["estimate", "--config", str(cfg)]) == cli.EXIT_DATA
    assert "every pair" in capsys.readouterr().err


def test_estimate_bad_csv_is_data_error(tmp_path, capsys):
    sample = tmp_path / "bad.csv"
    sample.write_text("id,y,in_b,r,x1,z1\na,1,1,1,oops,2\n")
    cfg = write_config(tmp_path, input="bad.csv", x_columns="x1", z_columns="z1", n_b=10, t_x_b="1", t_z="1")
    assert cli.run(["estimate", "--config", str(cfg)]) == cli.EXIT_DATA
    assert "error[parse]" in capsys.readouterr().err


def test_simulate_invalid_rho_reports_minimum(capsys):
    code = cli.run([
        "simulate", "--set", "rho_xy=0.9", "--set", "rho_zy=0.9", "--set", "n_resp=2250",
        "--set", "rho_xz_policy=explicit", "--set", "rho_xz=0", "--replicates", "5",
    ])
    assert code == cli.EXIT_CONFIG
    assert "0.62" in capsys.readouterr().err


def test_simulate_reruns_byte_identical(tmp_path):
    args = [
        "simulate", "--set", "rho_xy=0.3,0.9", "--set", "rho_zy=0.6", "--set", "n_resp=300",
        "--set", "n_total=1200", "--set", "n_b=900", "--set", "sample_sizes=100,200",
        "--replicates", "15", "--seed", "3",
    ]
    assert cli.run(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.run(args + ["--out", str(tmp_path / "b")]) == 0
    for ext in (".csv", ".txt"):
        assert (tmp_path / f"a{ext}").read_bytes() == (tmp_path / f"b{ext}").read_bytes()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 1 + 2 * 2


def test_diagnose_generated_frame_matches_library(tmp_path, capsys):
    out = tmp_path / "frame.csv"
    argv = [
        "diagnose", "--set", "n_total=1000", "--set", "n_b=750", "--set", "n_resp=225",
        "--set", f"frame_out={out}", "--format", "csv",
    ]
    assert cli.run(argv) == 0
    printed = dict(line.split(",", 1) for line in capsys.readouterr().out.splitlines()[1:])
    cfg = cli.RunConfig("diagnose", {"input": str(out), "x_columns": "x1", "z_columns": "z1"})
    frame = cli.diagnose_frame(cfg)
    rep = approximate_expectation(frame, compute_totals(frame))
    assert float(printed["ae"]) == rep.ae
    assert float(printed["approx_rb"]) == rep.approx_rb


def test_diagnose_full_coverage_marks_d_nb_unavailable(capsys):
    argv = ["diagnose", "--set", "n_total=500", "--set", "n_b=500", "--set", "n_resp=200", "--format", "csv"]
    assert cli.run(argv) == 0
    printed = dict(line.split(",", 1) for line in capsys.readouterr().out.splitlines()[1:])
    assert printed["d_nb"].startswith("unavailable")
    assert float(printed["term_undercoverage"]) == 0.0


def test_diagnose_conditions_satisfied_terms_vanish(tmp_path, capsys):
    # y exactly linear in a shared auxiliary: every stratum regression coincides
    n = 200
    x = np.random.default_rng(0).normal(size=n)
    y = 1.0 + 2.0 * x
    z = x.copy()
    with open(tmp_path / "pop.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "y", "in_b", "r", "x1", "z1"])
        for j in range(n):
            x_cell = repr(float(x[j])) if j < 150 else ""
            w.writerow([j, repr(float(y[j])), int(j < 150), int(j < 60), x_cell, repr(float(z[j]))])
    argv = ["diagnose", "--set", f"input={tmp_path / 'pop.csv'}", "--set", "x_columns=x1",
            "--set", "z_columns=z1", "--format", "csv"]
    assert cli.run(argv) == 0
    printed = dict(line.split(",", 1) for line in capsys.readouterr().out.splitlines()[1:])
    for key in ("term_nonresponse", "term_condition2", "term_undercoverage"):
        assert abs(float(printed[key])) < 1e-8
