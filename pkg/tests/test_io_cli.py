import json

import numpy as np
import pytest

from morlie.cli import main
from morlie.config import RunConfig, from_mapping
from morlie.datagen import BenchmarkConfig, generate
from morlie.actions import affine_cloud_action
from morlie.fitting import fit_rho_theta, fit_velocity_based
from morlie.io import (
    ParseError,
    export_csv,
    ingest_csv,
    parse_config,
    read_assignment,
    read_rho,
    read_sg,
    read_table,
    read_truth,
    write_assignment,
    write_rho,
    write_sg,
    write_table,
    write_truth,
)


def test_rigid_roundtrip_bit_exact(tmp_path):
    S, truth = generate(BenchmarkConfig(n_traj=2, n_particles=7, n_steps=30))
    path = tmp_path / "s.csv"
    export_csv(S, path)
    back = ingest_csv(path)
    assert back.equals(S)
    write_truth(tmp_path / "t.csv", truth.times, truth.group_path)
    t, g, a = read_truth(tmp_path / "t.csv")
    assert np.array_equal(t, truth.times) and np.array_equal(g, truth.group_path) and a is None


@pytest.mark.parametrize("family", ["radial", "transport"])
def test_other_charts_roundtrip(tmp_path, family):
    S, _ = generate(BenchmarkConfig(family, n_steps=10))
    export_csv(S, tmp_path / "s.csv")
    back = ingest_csv(tmp_path / "s.csv")
    assert back.equals(S) and back.meta == S.meta


def test_rows_are_sorted_on_ingest(tmp_path):
    S, _ = generate(BenchmarkConfig(n_traj=2, n_particles=3, n_steps=4))
    export_csv(S, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    head, body = lines[:2], lines[2:]
    (tmp_path / "r.csv").write_text("\n".join(head + body[::-1]) + "\n")
    assert ingest_csv(tmp_path / "r.csv").equals(S)


def test_nan_row_is_reported(tmp_path):
    S, _ = generate(BenchmarkConfig(n_traj=1, n_particles=3, n_steps=4))
    export_csv(S, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    parts = lines[5].split(",")
    parts[4] = "nan"
    lines[5] = ",".join(parts)
    (tmp_path / "s.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError, match=r":6: NaN"):
        ingest_csv(tmp_path / "s.csv")


def test_empty_data_section(tmp_path):
    (tmp_path / "e.csv").write_text("#morlie-snapshots v1\ntraj,time,particle,x,y,z\n")
    with pytest.raises(ValueError, match="empty snapshot set"):
        ingest_csv(tmp_path / "e.csv")


@pytest.mark.parametrize("body, msg", [
    ("traj,time,particle,x,y\n", "unknown column header"),
    ("traj,time,particle,x,y,z\n0,0,0,1,2\n", "expected 6 fields"),
    ("traj,time,particle,x,y,z\n0,0,0,1,2,a\n", "non-numeric"),
    ("traj,time,particle,x,y,z\n0,0,1,1,2,3\n", "0..N-1"),
])
def test_schema_violations(tmp_path, body, msg):
    (tmp_path / "b.csv").write_text("#morlie-snapshots v1\n" + body)
    with pytest.raises(ParseError, match=msg):
        ingest_csv(tmp_path / "b.csv")


def test_missing_magic(tmp_path):
    (tmp_path / "b.csv").write_text("traj,time,particle,x,y,z\n")
    with pytest.raises(ParseError, match=":1:"):
        ingest_csv(tmp_path / "b.csv")


def test_sg_rho_assignment_roundtrip(tmp_path):
    S, _ = generate(BenchmarkConfig(n_traj=2, n_particles=6, n_steps=40))
    Sg = fit_velocity_based(affine_cloud_action(), S)
    write_sg(tmp_path / "sg.csv", Sg)
    back = read_sg(tmp_path / "sg.csv")
    assert np.array_equal(back.coeffs, Sg.coeffs) and np.array_equal(back.times, Sg.times)
    assert np.array_equal(back.basis.elements, Sg.basis.elements) and back.t_end == Sg.t_end
    rho = fit_rho_theta(Sg, 3, 10)
    write_rho(tmp_path / "rho.csv", rho)
    r2 = read_rho(tmp_path / "rho.csv")
    ts = np.linspace(*rho.domain, 17)
    assert np.array_equal(r2(ts), rho(ts)) and r2.rmse == rho.rmse
    write_assignment(tmp_path / "a.csv", [1, 0, 1])
    assert read_assignment(tmp_path / "a.csv").tolist() == [1, 0, 1]


def test_header_only_table(tmp_path):
    write_table(tmp_path / "t.csv", ["traj", "time", "error"], [])
    assert (tmp_path / "t.csv").read_text() == "traj,time,error\n"
    assert read_table(tmp_path / "t.csv") == (["traj", "time", "error"], [])


def test_config_file_and_coercion(tmp_path):
    (tmp_path / "c.cfg").write_text("family = sheering  # comment\nn-steps = 20\ncluster_sizes = 5,6\nwidth = yes\n")
    vals = parse_config(tmp_path / "c.cfg")
    cfg = from_mapping(vals)
    assert cfg.family == "sheering" and cfg.width is True
    assert cfg.bench == {"n_steps": 20, "cluster_sizes": (5, 6)}
    assert cfg.benchmark().cluster_sizes == (5, 6)
    with pytest.raises(ValueError):
        from_mapping({"bogus": "1"})
    with pytest.raises(ValueError):
        RunConfig(fit_mode="magic")
    (tmp_path / "bad.cfg").write_text("no equals sign\n")
    with pytest.raises(ParseError, match=":1:"):
        parse_config(tmp_path / "bad.cfg")


# -- CLI ----------------------------------------------------------------------------

def test_cli_stage_chain(tmp_path, capsys):
    d = tmp_path
    args = ["--n_traj", "2", "--n_particles", "8", "--n_steps", "60", "--T", "0.6"]
    assert main(["generate", "--out", str(d / "s.csv"), "--truth", str(d / "t.csv")] + args) == 0
    assert main(["fit", "--input", str(d / "s.csv"), "--out", str(d / "sg.csv")]) in (0, 2)
    capsys.readouterr()
    assert main(["reduce", "--sg", str(d / "sg.csv"), "--out", str(d / "h.json")]) in (0, 2)
    red = json.loads(capsys.readouterr().out)
    assert 1 <= red["dim"] <= 12
    assert main(["simulate", "--input", str(d / "s.csv"), "--sg", str(d / "sg.csv"), "--out", str(d / "r.csv"),
                 "--n_segments", "3"]) == 0
    rec = ingest_csv(d / "r.csv")
    S = ingest_csv(d / "s.csv")
    assert np.array_equal(rec.states[0][0], S.states[0][0])
    assert main(["evaluate", "--input", str(d / "s.csv"), "--reconstruction", str(d / "r.csv"),
                 "--out", str(d / "e.csv")]) == 0
    ev = json.loads(capsys.readouterr().out)
    assert ev["mean_error"] >= 0 and ev["pod_rank"] >= 1


def test_cli_simulate_clips_segments_on_short_data(tmp_path):
    d = tmp_path
    main(["generate", "--out", str(d / "s.csv"), "--n_traj", "1", "--n_particles", "6", "--n_steps", "30",
          "--T", "0.3", "--sigma", "0"])
    main(["fit", "--input", str(d / "s.csv"), "--out", str(d / "sg.csv"), "--fit_mode", "velocity_based"])
    # default n_segments exceeds the strided samples; the pipeline clips and so must simulate
    assert main(["simulate", "--input", str(d / "s.csv"), "--sg", str(d / "sg.csv"), "--out", str(d / "r.csv")]) == 0
    assert ingest_csv(d / "r.csv").states[0].shape == ingest_csv(d / "s.csv").states[0].shape


def test_cli_cluster_and_width(tmp_path, capsys):
    d = tmp_path
    assert main(["generate", "--family", "sheering", "--n_traj", "3", "--n_steps", "400",
                 "--out", str(d / "s.csv")]) == 0
    assert main(["cluster", "--input", str(d / "s.csv"), "--out", str(d / "a.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["n_G"] == 2
    assert main(["generate", "--family", "transport", "--n_steps", "5", "--out", str(d / "u.csv")]) == 0
    assert main(["width", "--input", str(d / "u.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["width"] <= 1e-8


def test_cli_config_file_and_override(tmp_path):
    (tmp_path / "c.cfg").write_text(f"n_traj = 1\nn_particles = 4\nn_steps = 5\nout = {tmp_path / 'a.csv'}\n")
    assert main(["generate", "--config", str(tmp_path / "c.cfg"), "--n_particles", "6"]) == 0
    S = ingest_csv(tmp_path / "a.csv")
    assert S.n_traj == 1 and S.width == 18


def test_cli_errors(tmp_path, capsys):
    assert main(["fit", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["generate"]) == 1
    with pytest.raises(SystemExit):
        main(["nonsense"])
