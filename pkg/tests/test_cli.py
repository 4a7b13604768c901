import json
import math
import subprocess
import sys

import pytest

from qgnlo import cli
from qgnlo.graphs import build_graph


def run_cli(args):
    return cli.main(list(args))


@pytest.fixture()
def wire_file(tmp_path):
    g = build_graph([(0, 0), (1, 0)], [(0, 1)])
    path = tmp_path / "wire.json"
    path.write_text(g.to_json())
    return path


@pytest.fixture()
def star_file(tmp_path):
    g = build_graph([(0, 0), (1, 0), (-0.6, 0),
                     (0.13 * math.cos(1.0), 0.13 * math.sin(1.0))],
                    [(0, 1), (0, 2), (0, 3)])
    path = tmp_path / "star.json"
    path.write_text(g.to_json())
    return path


def test_solve_wire_reports_zero_beta(tmp_path, wire_file, capsys):
    out = tmp_path / "run"
    assert run_cli(["solve", "--graph", str(wire_file),
                    "--out", str(out)]) == 0
    report = json.loads((out / "solve_report.json").read_text())
    assert abs(report["tensors"]["beta"]["xxx"]) < 1e-10
    assert (out / "manifest.json").exists()


def test_solve_best_star_value(tmp_path, star_file):
    out = tmp_path / "run"
    assert run_cli(["solve", "--graph", str(star_file), "--out",
                    str(out)]) == 0
    report = json.loads((out / "solve_report.json").read_text())
    assert report["tensors"]["beta_xxx_opt"] == pytest.approx(0.574,
                                                              abs=0.01)


def test_solve_triangle_lists_zero_mode_first(tmp_path):
    g = build_graph([(0, 0), (1, 0), (0.4, 0.8)], [(0, 1), (1, 2), (2, 0)])
    path = tmp_path / "tri.json"
    path.write_text(g.to_json())
    out = tmp_path / "run"
    assert run_cli(["solve", "--graph", str(path), "--out", str(out)]) == 0
    report = json.loads((out / "solve_report.json").read_text())
    assert report["wavenumbers"][0] == 0.0
    assert report["mode_families"][0] == "zero"


def test_solve_malformed_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "qgnlo-graph", "vertices": []}')
    assert run_cli(["solve", "--graph", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.json" in err


def test_missing_graph_flag_is_config_error():
    assert run_cli(["solve"]) == 2


def test_ensemble_writes_csv_summary_manifest(tmp_path):
    out = tmp_path / "ens"
    assert run_cli(["ensemble", "--class", "bent-wire", "--samples", "25",
                    "--seed", "3", "--out", str(out)]) == 0
    assert (out / "records.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["class"] == "bent-wire"
    assert summary["n_samples"] == 25


def test_ensemble_unknown_class(tmp_path):
    assert run_cli(["ensemble", "--class", "nope", "--samples", "5",
                    "--out", str(tmp_path / "x")]) == 2


def test_manifest_replay_byte_identical(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli(["ensemble", "--class", "3-star", "--samples", "20",
                    "--seed", "11", "--out", str(out1)]) == 0
    cfg = cli.load_manifest(out1)
    cfg.out_dir = str(out2)
    assert cli.cmd_ensemble(cfg) == 0
    assert (out1 / "records.csv").read_bytes() \
        == (out2 / "records.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() \
        == (out2 / "summary.json").read_bytes()


def test_report_aggregates_and_is_idempotent(tmp_path, capsys):
    out = tmp_path / "ens"
    run_cli(["ensemble", "--class", "bent-wire", "--samples", "10",
             "--seed", "1", "--out", str(out)])
    assert run_cli(["report", str(out)]) == 0
    first = capsys.readouterr().out
    assert "bent-wire" in first
    assert run_cli(["report", str(out)]) == 0
    assert capsys.readouterr().out == first


def test_report_missing_dir_is_error(tmp_path, capsys):
    assert run_cli(["report", str(tmp_path / "nothing")]) == 2


def test_scan_delta_writes_table(tmp_path):
    out = tmp_path / "scan"
    cfg = cli.RunConfig(command="scan", scan_kind="delta", out_dir=str(out),
                        n_states=14)
    import qgnlo.ensemble as ens
    import numpy as np
    rows = ens.delta_wire_scan(g_values=np.array([0.0, 4.0]),
                               s0_values=np.array([0.35]), n_states=14)
    assert rows.rows[0]["beta_full"] == pytest.approx(0.0, abs=1e-9)
    assert run_cli(["scan", "--kind", "angle", "--points", "6",
                    "--angles", "40", "--out", str(out)]) == 0
    assert (out / "angle_scan.csv").exists()


def test_config_file_with_flag_override(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"topology_class": "bent-wire",
                                    "n_samples": 8, "seed": 5}))
    out = tmp_path / "o"
    assert run_cli(["--config", str(cfg_path), "ensemble", "--samples", "6",
                    "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_samples"] == 6  # flag wins
    assert summary["seed"] == 5      # file value survives


def test_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "qgnlo.cli"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
