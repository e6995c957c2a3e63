import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from randlat.cli import main
from randlat.experiments import (
    CSV_COLUMNS,
    CSV_HEADER,
    SWEEP_COLUMNS,
    ExperimentConfig,
    run_sweep,
    run_verify,
    strip_timing,
    rows_to_csv,
)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    return list(csv.DictReader(lines[1:]))


# -- sample ------------------------------------------------------------------

def test_sample_deterministic(capsys):
    assert main(["sample", "--d", "2", "--sampler", "exact2", "--count", "3", "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["sample", "--d", "2", "--sampler", "exact2", "--count", "3", "--seed", "7"]) == 0
    assert capsys.readouterr().out == first
    recs = [json.loads(line) for line in first.splitlines()]
    assert len(recs) == 3
    for r in recs:
        assert abs(np.linalg.det(np.array(r["basis"])) - 1) < 1e-9
        assert r["shortest_vector_norm"] > 0


def test_sample_affine_offsets(capsys):
    assert main(["sample", "--d", "3", "--count", "5", "--affine", "--seed", "1"]) == 0
    for line in capsys.readouterr().out.splitlines():
        r = json.loads(line)
        u = np.linalg.solve(np.array(r["basis"]), np.array(r["offset"]))
        assert np.all(u >= 0) and np.all(u < 1)


def test_sample_siegel_d5_is_usage_error(capsys):
    assert main(["sample", "--d", "5", "--sampler", "siegel"]) == 2
    assert "siegel" in capsys.readouterr().err


def test_unknown_sampler_exit_2():
    assert main(["verify", "--sampler", "bogus", "--checks", "oracle"]) == 2


def test_bad_hecke_prime_exit_2():
    assert main(["sample", "--sampler", "hecke", "--hecke-prime", "10001"]) == 2


# -- count -------------------------------------------------------------------

def test_count_shifted_z2(tmp_path, capsys):
    b = tmp_path / "z2.json"
    b.write_text("[[1, 0], [0, 1]]")
    region = json.dumps({"type": "ball", "center": [0, 0], "radius": 1.5})
    assert main(["count", "--basis", str(b), "--offset", "[0.5, 0.5]", "--region", region, "--list-points"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["count"] == 4
    np.testing.assert_allclose(np.abs(out["points"]), 0.5)


def test_count_missing_args():
    assert main(["count"]) == 2


def test_count_non_unimodular(tmp_path):
    b = tmp_path / "bad.json"
    b.write_text("[[2, 0], [0, 1]]")
    assert main(["count", "--basis", str(b), "--region", '{"type": "ball", "center": [0, 0], "radius": 1}']) == 2


def test_count_bad_region(tmp_path):
    b = tmp_path / "z2.json"
    b.write_text("[[1, 0], [0, 1]]")
    assert main(["count", "--basis", str(b), "--region", '{"type": "ball"']) == 2


# -- spectra -----------------------------------------------------------------

def test_spectra_row(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectra", "--d", "2", "--radial", "[[0.1, 3]]", "--trials", "2000", "--seed", "3",
                 "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert row["satisfied"] == "true"
    assert abs(float(row["theory_value_or_bound"]) - 0.93188) < 1e-4


def test_spectra_malformed_radial():
    assert main(["spectra", "--radial", "[[0.1, 3]", "--trials", "1000"]) == 2
    assert main(["spectra", "--radial", "[[3, 0.1]]", "--trials", "1000"]) == 2


# -- sweep -------------------------------------------------------------------

def test_sweep_csv_and_svg(tmp_path):
    out, svg = tmp_path / "sw.csv", tmp_path / "sw.svg"
    code = main(["sweep", "--family", "ball", "--volumes", "1,5,20", "--trials", "3000", "--seed", "2",
                 "--out", str(out), "--plot", str(svg)])
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [float(r["volume"]) for r in rows] == pytest.approx([1, 5, 20])
    assert all(float(r["normalized"]) < 1 for r in rows)
    assert svg.read_text().startswith("<svg")


def test_sweep_regular_setting():
    cfg = ExperimentConfig(setting="regular", volumes=[10, 50], trials=2000, seed=4)
    code, rows = run_sweep(cfg)
    assert code == 0
    assert all(r.normalized_bound == pytest.approx(26.3189, abs=1e-4) for r in rows)


def test_sweep_thinbox_shapes():
    cfg = ExperimentConfig(family="thinbox", volumes=[2, 8], shape_params=[1, 8], trials=1000, seed=5)
    code, rows = run_sweep(cfg)
    assert code == 0 and len(rows) == 4


@pytest.mark.parametrize("vols", ["", "5,1", "0,1"])
def test_sweep_bad_grid(vols):
    assert main(["sweep", "--volumes", vols, "--trials", "100"]) == 2


# -- verify and config ---------------------------------------------------------

def test_verify_subset(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["verify", "--checks", "oracle,mean", "--trials", "2000", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == CSV_COLUMNS
    ids = [r["experiment_id"] for r in rows]
    assert "oracle.count_region_vs_brute_force" in ids
    assert sum(i.startswith("mean.") for i in ids) == 9


def test_verify_unknown_check():
    assert main(["verify", "--checks", "nonsense"]) == 2


def test_verify_time_budget_marks_skipped():
    cfg = ExperimentConfig(checks=["mean"], trials=100_000, time_budget=0.0)
    code, rows = run_verify(cfg)
    assert code == 1
    assert rows[0].satisfied == "skipped"


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"d": 3, "count": 2, "seed": 11}))
    assert main(["sample", "--config", str(cfg), "--seed", "12"]) == 0
    recs = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(recs) == 2 and recs[0]["d"] == 3 and recs[0]["seed"] == 12


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dimension": 3}))
    assert main(["sample", "--config", str(cfg)]) == 2


def test_strip_timing_drops_column():
    cfg = ExperimentConfig(checks=["oracle"])
    _, rows = run_verify(cfg)
    text = strip_timing(rows_to_csv(rows))
    assert "wall_time_ms" not in text[1]
    assert text[0] == CSV_HEADER


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "randlat", "sample", "--count", "1"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["d"] == 2
