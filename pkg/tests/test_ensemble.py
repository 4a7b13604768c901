import math

import numpy as np
import pytest

from qgnlo import ensemble


def test_same_seed_bit_identical():
    r1 = ensemble.sample_topology("3-star", 50, seed=9)
    r2 = ensemble.sample_topology("3-star", 50, seed=9)
    assert [r.csv_row() for r in r1.records] \
        == [r.csv_row() for r in r2.records]
    assert r1.summary.to_dict() == r2.summary.to_dict()


def test_records_reproducible_individually():
    full = ensemble.sample_topology("lollipop", 20, seed=4)
    lone = ensemble.solve_record("lollipop", 4, 13)
    assert lone.csv_row() == full.records[13].csv_row()


def test_summary_is_order_statistic_of_records():
    res = ensemble.sample_topology("bent-wire", 40, seed=2)
    ok = [r for r in res.records if not r.failed]
    assert res.summary.max_abs_beta_xxx == pytest.approx(
        max(abs(r.tensors.beta_xxx_opt) for r in ok))
    assert res.summary.gamma_min == pytest.approx(
        min(r.tensors.gamma_xxxx_min for r in ok))
    assert res.summary.n_failed == sum(r.failed for r in res.records)


def test_more_samples_never_lower_max():
    small = ensemble.sample_topology("3-star", 30, seed=5)
    big = ensemble.sample_topology("3-star", 60, seed=5)
    assert big.summary.max_abs_beta_xxx \
        >= small.summary.max_abs_beta_xxx - 1e-12


def test_unknown_class_rejected():
    with pytest.raises(ValueError):
        ensemble.sample_topology("moebius", 5, seed=0)


def test_csv_round_trip(tmp_path):
    import csv
    res = ensemble.sample_topology("delta-wire", 12, seed=3)
    path = tmp_path / "records.csv"
    ensemble.write_records_csv(path, res.records)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ensemble.EnsembleRecord.csv_header()
    assert len(rows) == 13
    got = float(rows[1][rows[0].index("beta_xxx_opt")])
    assert got == pytest.approx(res.records[0].tensors.beta_xxx_opt,
                                rel=0, abs=0)


def test_prong_scan_smoke():
    res = ensemble.prong_scan_3star(middle=[0.4, 0.6], short=[0.1, 0.5],
                                    n_angles=25, seed=1, n_states=20)
    assert math.isnan(res.beta_max[0, 1])  # short > middle is skipped
    assert res.beta_max[1, 0] > 0.3
    assert res.peak in [(0.4, 0.1), (0.6, 0.1), (0.6, 0.5), (0.4, 0.5)]


def test_angle_scan_antiparallel_and_symmetry():
    swept = np.linspace(0.0, 2 * math.pi, 25)
    res = ensemble.angle_scan((1.0, 0.6, 0.13), swept, n_draws=12, seed=2,
                              n_states=24)
    best_idx = int(np.argmax(res.beta_opt.max(axis=1)))
    assert abs(res.swept[best_idx] - math.pi) < 0.45
    # trace endpoints match an independent single-point evaluation
    lone = ensemble.angle_scan((1.0, 0.6, 0.13), [res.swept[best_idx]],
                               seed=99, n_states=24,
                               short_angle=float(res.short_angles[best_idx,
                                                                  0]))
    assert lone.beta_opt[0, 0] == pytest.approx(
        res.beta_opt[best_idx, 0], rel=1e-12)


def test_angle_scan_mirror_symmetric_configuration():
    # equal middle/short prongs placed symmetrically about x: the raw
    # beta_xxx trace crosses zero at the symmetric angle by mirror symmetry
    res = ensemble.angle_scan((1.0, 0.6, 0.6), [2 * math.pi - 1.0],
                              seed=0, n_states=24, short_angle=1.0)
    bxxx = res.beta_raw[0, 0]
    res_off = ensemble.angle_scan((1.0, 0.6, 0.6), [2 * math.pi - 1.4],
                                  seed=0, n_states=24, short_angle=1.0)
    assert abs(bxxx) < 1e-9
    assert abs(res_off.beta_raw[0, 0]) > 1e-3


def test_spectrum_vs_beta_traces():
    rows = ensemble.spectrum_vs_beta("3-star", 40, seed=8, n_states=20)
    assert rows.shape[1] == 11
    assert np.all(np.diff(rows[:, 0]) >= 0)
    # eigenvalues bounded by the star root separators
    res = ensemble.sample_topology("3-star", 40, seed=8, n_states=20)
    for rec in res.records:
        if rec.failed:
            continue
        l_tot = sum(rec.lengths)
        cells = np.array(rec.low_ks) * l_tot / math.pi
        assert np.all(np.floor(cells) == np.arange(1, len(cells) + 1))


def test_delta_wire_scan_small_grid():
    res = ensemble.delta_wire_scan(g_values=[0.0, 5.0],
                                   s0_values=[0.3, 0.5], n_states=16)
    by_key = {(r["g"], r["s0"]): r for r in res.rows}
    assert by_key[(0.0, 0.3)]["beta_full"] == pytest.approx(0.0, abs=1e-9)
    assert by_key[(0.0, 0.5)]["beta_full"] == pytest.approx(0.0, abs=1e-9)
    assert by_key[(5.0, 0.5)]["beta_full"] == pytest.approx(0.0, abs=1e-9)
    assert abs(by_key[(5.0, 0.3)]["beta_full"]) > 0.3
    assert res.max_abs_beta == pytest.approx(
        abs(by_key[(5.0, 0.3)]["beta_full"]))


def test_failed_samples_are_reported_not_fatal():
    rec = ensemble.EnsembleRecord(0, "3-star", (1.0,), (0.0,), {}, (),
                                  None, failed=True, error="x")
    ok = ensemble.solve_record("3-star", 1, 2)
    summary = ensemble.summarize("3-star", 1, 30, [rec, ok])
    assert summary.n_failed == 1
    assert summary.n_samples == 2
