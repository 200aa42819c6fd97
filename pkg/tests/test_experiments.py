"""Experiment driver tests: pinned ratios, growth rates, determinism,
report formats, and the config surface."""

import json

import numpy as np
import pytest

from conewave.besov import BesovParams, besov_analytic
from conewave.experiments import (ExperimentConfig, TrialReport, emit_report,
                                  run_experiment)


def make_cfg(**kw):
    return ExperimentConfig.from_dict(kw)


LINE = dict(cone_size=1, counts=[1024], halfwidths=[200.0], delta=0.5, r_max=2.0)
PLANE = dict(cone_size=2, counts=[256, 256], halfwidths=[30.0, 30.0], delta=1.1)


# ---------------------------------------------------------------- config

def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys"):
        make_cfg(experiment="calibrate", bogus=1)


def test_config_requires_experiment():
    with pytest.raises(ValueError, match="experiment"):
        ExperimentConfig.from_dict({"trials": 3})


def test_unknown_experiment_rejected():
    with pytest.raises(ValueError, match="unknown experiment"):
        run_experiment(make_cfg(experiment="frobnicate"))


def test_lorentz_driver_rejected():
    with pytest.raises(ValueError, match="product cones"):
        run_experiment(make_cfg(experiment="calibrate", cone_kind="lorentz",
                                cone_size=3, counts=[32, 32, 32],
                                halfwidths=[5.0, 5.0, 5.0]))


# ------------------------------------------------------------ decoupling

def test_decoupling_plancherel_pins_ratio():
    # disjoint spectra, p = q = 2, s = 0: the ratio is 1 up to roundoff
    rep = run_experiment(make_cfg(experiment="decoupling", s=[0.0], p=2.0, q=2.0,
                                  trials=6, seed=3, **LINE))
    assert len(rep.rows) == 6
    for row in rep.rows:
        assert row["ratio"] == pytest.approx(1.0, abs=1e-12)
    assert rep.summary["empirical_constant_lower_bound"] == rep.summary["max_ratio"]


def test_decoupling_single_index_matches_besov_arithmetic():
    # one active bump: the rhs must reproduce the per-index arithmetic of
    # besov_analytic on the same windowed spectrum, term for term
    from conewave.cone import delta_power, invariant_distance, make_cone
    from conewave.lattice import Region, build_bumps, build_lattice
    from conewave.nilgroup import make_abelian, make_grid
    from conewave.spectral import calibrate_constants
    from conewave.experiments import (_dual_nodes, _scatter_symbol, _trial_rng,
                                      _window_profile)

    cfg = make_cfg(experiment="decoupling", s=[0.3], p=2.0, q=2.0,
                   trials=1, seed=11, active_indices=[2], **LINE)
    rep = run_experiment(cfg)
    row = rep.rows[0]

    cone = make_cone("product", 1)
    data = make_abelian(cone)
    grid = make_grid(data, (1024,), (200.0,))
    constants = calibrate_constants(data, grid)
    region = Region(np.asarray(cone.e_dual, dtype=float), 0.0, 2.0)
    spec = build_lattice(cone, 0.5, region)
    bumps = build_bumps(cone, spec, "partition_sq")

    # rebuild the windowed spectrum (no bump factor) the driver modulated
    axes, pts, inside, weights = _dual_nodes(data, grid)
    live = pts[inside]
    win = _window_profile(invariant_distance(cone, spec.points[2], live),
                          0.35 * 0.5, 0.45 * 0.5)
    rng = _trial_rng(11, 0)
    amp = complex(rng.standard_normal() + 1j * rng.standard_normal())
    xk = rng.uniform(-0.5 * np.asarray(grid.halfwidths), 0.5 * np.asarray(grid.halfwidths))
    sym = _scatter_symbol(data, axes, inside, weights,
                          amp * np.exp(-1j * (live @ xk)) * win)
    report = besov_analytic(data, sym, BesovParams(np.array([0.3]), 2.0, 2.0),
                            spec, bumps, grid, constants)
    entry = next(e for e in report["per_index"] if e["k"] == 2)
    assert row["rhs"] == pytest.approx(entry["weight"] * entry["lp"], rel=1e-12)
    # lhs and rhs differ by exactly the sequence weight of the one term
    w2 = float(delta_power(cone, "dual", np.array([0.3]), spec.points[2]))
    assert row["ratio"] * w2 == pytest.approx(1.0, rel=1e-12)


def test_decoupling_empty_shell_errors():
    # region far above the unit shell: no bump meets the N ~ 1 band
    with pytest.raises(ValueError, match="empty shell"):
        run_experiment(make_cfg(experiment="decoupling", s=[0.0], shell_c=1.5,
                                region_center=[float(np.exp(3.0))], trials=1,
                                cone_size=1, counts=[1024], halfwidths=[200.0],
                                delta=0.5, r_max=1.0))
    with pytest.raises(ValueError, match="empty shell"):
        run_experiment(make_cfg(experiment="decoupling", s=[0.0],
                                active_indices=[], trials=1, **LINE))


def test_decoupling_weighted_scales_single_term():
    base = dict(experiment="decoupling", s=[0.0], p=2.0, q=2.0, trials=2,
                seed=5, active_indices=[1], **LINE)
    plain = run_experiment(make_cfg(**base))
    beta = 0.37
    weighted = run_experiment(make_cfg(weighted=True, weight_c=beta, **base))
    from conewave.cone import make_cone
    from conewave.lattice import Region, build_lattice
    cone = make_cone("product", 1)
    spec = build_lattice(cone, 0.5, Region(np.asarray(cone.e_dual, float), 0.0, 2.0))
    factor = float(np.exp(beta * np.dot(spec.points[1], cone.e_primal)))
    for rp, rw in zip(plain.rows, weighted.rows):
        assert rw["rhs"] == pytest.approx(rp["rhs"] * factor, rel=1e-12)
        assert rw["lhs"] == pytest.approx(rp["lhs"], rel=1e-12)


def test_decoupling_running_max_trajectory():
    rep = run_experiment(make_cfg(experiment="decoupling", s=[0.2], p=4.0, q=2.0,
                                  trials=5, seed=1, **LINE))
    run = 0.0
    for (x, y), row in zip(rep.trajectory, rep.rows):
        run = max(run, row["ratio"])
        assert y == run
        assert x == row["trial"] + 1


# --------------------------------------------------------------- blowup

def test_blowup_slope_matches_smoothness():
    rep = run_experiment(make_cfg(experiment="blowup", s=[0.5, 0.0], p=2.0, q=2.0,
                                  k_max=25, seed=0, **PLANE))
    assert rep.summary["j"] == 0
    assert abs(rep.summary["slope"] - 0.5) < 0.03
    assert rep.summary["max_identity_error"] < 1e-3
    assert rep.summary["cross_check_error"] < 1e-3


def test_blowup_zero_smoothness_is_flat():
    rep = run_experiment(make_cfg(experiment="blowup", s=[0.0, 0.0], p=2.0, q=2.0,
                                  k_max=20, seed=0, **PLANE))
    ratios = [r["ratio"] for r in rep.rows]
    assert max(ratios) / min(ratios) < 1.05
    assert abs(rep.summary["slope"]) < 0.02


def test_blowup_exact_rescale_on_adapted_grids():
    rep = run_experiment(make_cfg(experiment="blowup", s=[0.5, 0.2], p=1.5, q=2.0,
                                  k_max=10, seed=0, **PLANE))
    # adapted-grid identity is float-exact, cross-check is real quadrature
    assert rep.summary["max_identity_error"] < 1e-12
    assert 0.0 < rep.summary["cross_check_error"] < 1e-3


def test_blowup_rank_one_rejected():
    with pytest.raises(ValueError, match="rank at least 2"):
        run_experiment(make_cfg(experiment="blowup", s=[0.5], **LINE))


def test_blowup_heisenberg_rejected():
    with pytest.raises(ValueError, match="rank one"):
        run_experiment(make_cfg(experiment="blowup", group="heisenberg",
                                cone_size=2, counts=[16, 16, 32, 32],
                                halfwidths=[3.0, 3.0, 10.0, 10.0], s=[0.5, 0.0]))


# ------------------------------------------------------------ multiplier

MULT = dict(experiment="multiplier", cone_size=2, counts=[128, 128],
            halfwidths=[12.0, 12.0], delta=0.4, r_max=1.0, trials=4, seed=1,
            t_samples=4, sem_counts=[96, 96], sem_halfwidths=[7.0, 7.0])


def test_multiplier_identity_is_exactly_one():
    rep = run_experiment(make_cfg(multiplier="one", s=[0.0, 0.0], p=2.0, q=2.0, **MULT))
    for row in rep.rows:
        assert row["ratio"] == 1.0
    assert rep.summary["seminorm"] > 0


def test_multiplier_unimodular_plancherel():
    rep = run_experiment(make_cfg(multiplier="delta_itau", tau=0.9,
                                  s=[0.0, 0.0], p=2.0, q=2.0, **MULT))
    for row in rep.rows:
        assert row["ratio"] == pytest.approx(1.0, abs=1e-10)


def test_multiplier_bounded_by_seminorm_off_l2():
    rep = run_experiment(make_cfg(multiplier="delta_itau", tau=1.3, p0=1.5,
                                  s=[0.1, 0.0], p=1.5, q=2.0, **MULT))
    assert np.isfinite(rep.summary["seminorm"])
    assert rep.summary["max_ratio"] <= 5.0 * rep.summary["seminorm"]


def test_multiplier_p_range_enforced():
    with pytest.raises(ValueError, match="p must lie"):
        run_experiment(make_cfg(multiplier="one", p0=1.5, p=1.2,
                                s=[0.0, 0.0], q=2.0, **MULT))
    with pytest.raises(ValueError, match="p0"):
        run_experiment(make_cfg(multiplier="one", p0=2.5, p=2.0,
                                s=[0.0, 0.0], q=2.0, **MULT))


def test_multiplier_unknown_name_rejected():
    with pytest.raises(ValueError, match="multiplier"):
        run_experiment(make_cfg(multiplier="mystery", s=[0.0, 0.0], **MULT))


# ------------------------------------------------------------ comparison

def test_comparison_band_two_sided():
    rep = run_experiment(make_cfg(experiment="comparison", s=[0.4], p=2.0, q=2.0,
                                  trials=20, seed=2, **LINE))
    assert rep.summary["min_ratio"] > 0
    assert rep.summary["spread"] < 10.0


def test_comparison_single_term_exact():
    rep = run_experiment(make_cfg(
        experiment="comparison", comparison_mode="single_term", cone_size=1,
        counts=[1024], halfwidths=[200.0], delta=0.5, r_max=0.3,
        region_center=[float(np.exp(0.9))], bump_mode="cover",
        s=[0.4], p=2.0, q=2.0, seed=0))
    assert rep.summary["rel_error"] < 1e-12
    # pin the closed form independently: one lattice point, one shell
    from conewave.cone import delta_power, make_cone
    from conewave.lattice import Region, build_lattice
    cone = make_cone("product", 1)
    spec = build_lattice(cone, 0.5, Region(np.array([float(np.exp(0.9))]), 0.0, 0.3))
    assert len(spec) == 1
    expected = float(delta_power(cone, "dual", np.array([0.4]), spec.points[0])) \
        / 2.0 ** (0.4 * rep.summary["shell_j"])
    assert rep.rows[0]["ratio"] == pytest.approx(expected, rel=1e-12)


def test_comparison_single_term_needs_cover_mode():
    with pytest.raises(ValueError, match="cover"):
        run_experiment(make_cfg(
            experiment="comparison", comparison_mode="single_term", cone_size=1,
            counts=[1024], halfwidths=[200.0], delta=0.5, r_max=0.3,
            region_center=[float(np.exp(0.9))], s=[0.4]))


def test_comparison_escaping_spectrum_errors():
    # spectrum wider than the declared region: the analytic norm refuses
    with pytest.raises(ValueError, match="support|cover|shell"):
        run_experiment(make_cfg(experiment="comparison", s=[0.4], p=2.0, q=2.0,
                                trials=1, seed=2, sym_radius=3.5, **LINE))


def test_comparison_degradation_declines():
    rep = run_experiment(make_cfg(experiment="comparison",
                                  comparison_mode="degradation", r_max=1.3,
                                  s=[0.5, 0.0], p=2.0, q=2.0, k_max=20, seed=0,
                                  **PLANE))
    assert rep.summary["last_ratio"] < 0.5 * rep.summary["first_ratio"]
    assert rep.summary["slope"] < -0.3


# ------------------------------------------------------- reports and CLI

def test_emit_report_rerun_is_byte_identical(tmp_path):
    cfg = make_cfg(experiment="decoupling", s=[0.2], p=4.0, q=2.0,
                   trials=4, seed=9, **LINE)
    a, b = tmp_path / "a", tmp_path / "b"
    emit_report(run_experiment(cfg), a, plot=True)
    emit_report(run_experiment(cfg), b, plot=True)
    for name in ("result.json", "trials.csv", "trajectory.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_emit_report_zero_rows(tmp_path):
    rep = run_experiment(make_cfg(experiment="calibrate", counts=[256],
                                  halfwidths=[40.0]))
    paths = emit_report(rep, tmp_path / "cal")
    text = paths["csv"].read_text()
    assert text == "trial,seed,ratio,lhs,rhs\n"
    payload = json.loads(paths["json"].read_text())
    assert payload["rows"] == []
    assert payload["summary"]["c_inversion"] == pytest.approx(1.0 / (2 * np.pi))


def test_emit_report_summary_recomputable(tmp_path):
    rep = run_experiment(make_cfg(experiment="comparison", s=[0.4], p=2.0, q=2.0,
                                  trials=10, seed=4, **LINE))
    payload = json.loads((emit_report(rep, tmp_path / "c")["json"]).read_text())
    ratios = [row["ratio"] for row in payload["rows"]]
    assert payload["summary"]["max_ratio"] == pytest.approx(max(ratios), rel=1e-12)
    assert payload["summary"]["min_ratio"] == pytest.approx(min(ratios), rel=1e-12)
    assert payload["summary"]["median_ratio"] == pytest.approx(
        float(np.median(ratios)), rel=1e-12)


def test_emit_report_svg_polyline(tmp_path):
    rep = run_experiment(make_cfg(experiment="blowup", s=[0.5, 0.0], p=2.0, q=2.0,
                                  k_max=6, seed=0, **PLANE))
    paths = emit_report(rep, tmp_path / "b", plot=True)
    svg = paths["svg"].read_text()
    assert "<polyline" in svg and svg.startswith("<svg")


def test_worker_count_does_not_change_rows():
    base = dict(experiment="comparison", s=[0.4], p=2.0, q=2.0, trials=6,
                seed=13, **LINE)
    serial = run_experiment(make_cfg(workers=1, **base))
    pooled = run_experiment(make_cfg(workers=4, **base))
    assert serial.rows == pooled.rows


def test_lattice_runner_reports_verification():
    rep = run_experiment(make_cfg(experiment="lattice", cone_kind="lorentz",
                                  cone_size=3, delta=0.45, r_max=1.0))
    assert rep.summary["separation_ok"]
    assert rep.summary["covering_ok"]
    assert rep.summary["count"] > 1
    assert rep.summary["plateau_radius"] > 0
    assert rep.rows == []


def test_cli_roundtrip(tmp_path):
    from conewave.cli import main
    cfg_path = tmp_path / "run.toml"
    cfg_path.write_text(
        'experiment = "decoupling"\ncone_size = 1\ncounts = [1024]\n'
        'halfwidths = [200.0]\ndelta = 0.5\nr_max = 2.0\ns = [0.0]\n'
        'p = 2.0\nq = 2.0\ntrials = 3\nseed = 7\n')
    out = tmp_path / "out"
    assert main(["decoupling", "--config", str(cfg_path), "--out", str(out),
                 "--plot"]) == 0
    assert (out / "result.json").exists()
    assert (out / "trials.csv").exists()
    assert (out / "trajectory.svg").exists()


def test_cli_config_error_exit_codes(tmp_path):
    from conewave.cli import main
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "decoupling"\nmystery = 1\n')
    assert main(["decoupling", "--config", str(bad)]) == 2
    mismatch = tmp_path / "mm.toml"
    mismatch.write_text('experiment = "blowup"\n')
    assert main(["decoupling", "--config", str(mismatch)]) == 2
    assert main(["blowup"]) == 2  # defaults are rank one, blow-up refuses


def test_cli_numerical_failure_exit_code(tmp_path, monkeypatch):
    import conewave.cli as cli

    def boom(cfg):
        raise RuntimeError("norm identity drift: synthetic")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["calibrate", "--out", str(tmp_path / "x")]) == 3
