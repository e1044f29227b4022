import glob
import json
import math
import os
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np
import pytest

import config
import main
from my_utils.initial_data import (approx_initial_data, approx_initial_state, deficit_measure,
                                   lgamma_distance)
from my_utils.snapshot_io import (MAGIC, SnapshotWriter, load_snapshot_series, read_records,
                                  write_record, write_table)
from my_utils.sweep_plan import build_members, make_delta_sweep, make_sweep
from solver.errors import ConfigError, ParameterError, PlanError, PreconditionError, SnapshotError
from solver.fields import MAGNETIC_BCS, ScalarField, VectorField3, divergence
from solver.geometry import Domain, build_basis
from sweep import run_plan, successive_differences
from tests.conftest import make_state

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f)
    return str(path)


# ---------------------------------------------------------------------------
# 配置
# ---------------------------------------------------------------------------

def test_default_config():
    cfg = config.load_config()
    assert cfg == config.DEFAULT_CONFIG
    assert cfg is not config.DEFAULT_CONFIG


def test_config_overrides_merge_per_key(tmp_path):
    path = write_json(tmp_path / "c.json", {"schema_version": 1, "physics": {"eps": 0.5}})
    cfg = config.load_config(path)
    assert cfg["physics"]["eps"] == 0.5
    assert cfg["physics"]["mu"] == config.DEFAULT_CONFIG["physics"]["mu"]


@pytest.mark.parametrize("data", [
    {"schema_version": 1, "physics": {"epsilon": 0.5}},
    {"schema_version": 1, "colour": "blue"},
    {"schema_version": 2},
    {"physics": {"eps": 0.5}},
    {"schema_version": 1, "domain": 3},
    {"schema_version": 1, "initial_data": {"scenario": "Nope"}},
])
def test_config_errors(tmp_path, data):
    path = write_json(tmp_path / "c.json", data)
    with pytest.raises(ConfigError):
        config.load_config(path)


def test_config_missing_or_malformed(tmp_path):
    with pytest.raises(ConfigError):
        config.load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        config.load_config(str(bad))


def test_free_form_scenario_params(tmp_path):
    path = write_json(tmp_path / "c.json", {
        "schema_version": 1,
        "initial_data": {"scenario": "VacuumDisk", "params": {"radius": 0.3, "anything": 1}},
    })
    cfg = config.load_config(path)
    params = config.scenario_params(cfg)
    assert params["radius"] == 0.3
    assert params["psi_width"] == config.SCENARIO_CONFIGS["VacuumDisk"]["psi_width"]
    assert "module_name" not in params


@pytest.mark.parametrize("path", sorted(glob.glob(str(CONFIG_DIR / "*.json"))))
def test_shipped_configs_load(path):
    cfg = config.load_config(path)
    assert cfg["schema_version"] == config.SCHEMA_VERSION


# ---------------------------------------------------------------------------
# 场景
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(config.SCENARIO_CONFIGS))
def test_scenarios_build(name, small_domain, rng):
    cfg = config.load_config(overrides={"initial_data": {"scenario": name}})
    fields = main.get_scenario_instance(cfg).build(small_domain, rng)
    assert fields.rho0.values.shape == small_domain.shape
    assert np.all(fields.rho0.values >= 0)
    assert fields.m0.values.shape == (3,) + small_domain.shape
    assert fields.H0.bcs == MAGNETIC_BCS
    assert np.iscomplexobj(fields.psi0.values)


def test_scenario_class_missing(monkeypatch):
    monkeypatch.setitem(config.SCENARIO_CONFIGS, "Ghost", {"module_name": "scenarios.heat_bump"})
    cfg = config.load_config(overrides={"initial_data": {"scenario": "Ghost"}})
    with pytest.raises(ConfigError):
        main.get_scenario_instance(cfg)


# ---------------------------------------------------------------------------
# 近似初始数据
# ---------------------------------------------------------------------------

def vacuum_disk_fields(domain, rng):
    cfg = config.load_config(overrides={"initial_data": {"scenario": "VacuumDisk"}})
    return main.get_scenario_instance(cfg).build(domain, rng)


def test_fine_delta_skips_smoothing(domain, rng):
    fields = vacuum_disk_fields(domain, rng)
    rho, m = approx_initial_data(fields.rho0, fields.m0, 1e-3, 8.0)
    np.testing.assert_array_equal(rho.values, np.maximum(fields.rho0.values, 1e-3))
    np.testing.assert_array_equal(m.values, fields.m0.values)
    assert deficit_measure(rho, fields.rho0) == 0.0


def test_upper_cutoff(domain):
    rho0 = ScalarField(domain, np.full(domain.shape, 10.0))
    rho, m = approx_initial_data(rho0, VectorField3.zeros(domain), 1e-3, 8.0)
    np.testing.assert_allclose(rho.values, 1e-3 ** (-1 / 16))
    assert deficit_measure(rho, rho0) == pytest.approx(domain.area)


def test_approximation_improves_as_delta_shrinks(domain, rng):
    fields = vacuum_disk_fields(domain, rng)
    gamma = 1.4
    dist, deficit = [], []
    for delta in (1e-2, 1e-3, 1e-4):
        rho, _ = approx_initial_data(fields.rho0, fields.m0, delta, 8.0)
        dist.append(lgamma_distance(rho, fields.rho0, gamma))
        deficit.append(deficit_measure(rho, fields.rho0))
    assert dist[0] > dist[1] > dist[2]
    assert deficit[0] >= deficit[1] >= deficit[2]


def test_approx_initial_data_preconditions(domain):
    rho0 = ScalarField(domain, np.ones(domain.shape))
    with pytest.raises(ParameterError):
        approx_initial_data(rho0, VectorField3.zeros(domain), 0.0, 8.0)
    vals = np.ones(domain.shape)
    vals[3, 3] = -1.0
    with pytest.raises(PreconditionError):
        approx_initial_data(ScalarField(domain, vals), VectorField3.zeros(domain), 1e-3, 8.0)


def test_approx_initial_state_cleans_fields(domain, rng):
    cfg = config.load_config(overrides={"initial_data": {"scenario": "SwirlFlow"}})
    fields = main.get_scenario_instance(cfg).build(domain, rng)
    X, Y = domain.mesh()
    H = fields.H0.values.copy()
    H[0] += 0.05 * np.sin(np.pi * X) * np.sin(np.pi * Y)
    fields.H0 = VectorField3(domain, H, MAGNETIC_BCS)
    fields.psi0.values[0, :] = 1.0
    approx = approx_initial_state(fields, 1e-3, 8.0)
    assert np.max(np.abs(divergence(approx.H))) < 1e-9 * np.max(np.abs(divergence(fields.H0)))
    assert not np.any(approx.psi.values[0])
    assert not np.any(approx.m.values[:, 0])


# ---------------------------------------------------------------------------
# 扫描计划
# ---------------------------------------------------------------------------

def test_cubic_members_and_grad_constants():
    cfg = config.load_config()
    m0, m1 = build_members(cfg, 2, "cubic")
    assert (m0.eps, m0.alpha, m0.N) == (1e-2, pytest.approx(1e-6), 1)
    assert (m1.eps, m1.alpha, m1.N) == (5e-3, pytest.approx(1.25e-7), 2)
    assert m0.C_N == pytest.approx(2 * math.pi, rel=1e-12)
    assert m1.C_N == pytest.approx(8 * math.pi, rel=1e-12)


@pytest.mark.parametrize("rule", ["cubic", "constant_alpha"])
def test_non_monotone_rules_rejected(rule):
    with pytest.raises(PlanError):
        make_sweep(config.load_config(), 3, rule)


def test_horizon_rule_is_monotone():
    cfg = config.load_config()
    plan = make_sweep(cfg, 3)
    qs = [m.q for m in plan.members]
    assert all(b > a for a, b in zip(qs, qs[1:]))
    np.testing.assert_allclose(qs, [math.exp(1.0), math.exp(1.5), math.exp(2.0)], rtol=1e-10)
    cfgs = plan.member_configs(cfg)
    assert [c["galerkin"]["N"] for c in cfgs] == [1, 2, 3]
    assert cfgs[2]["physics"]["eps"] == pytest.approx(2.5e-3)
    assert len({c["output_dir"] for c in cfgs}) == 3
    assert cfg["galerkin"]["N"] == config.DEFAULT_CONFIG["galerkin"]["N"]


def test_horizon_rule_leaves_room_for_every_member():
    cfg = config.load_config()

    def budget(eps, delta):
        return 2.0 + 10.0 * math.sqrt(eps)

    plan = make_sweep(cfg, 3, budget=budget)
    t_end, margin = cfg["time"]["t_end"], cfg["sweep"]["horizon_margin"]
    thetas = [math.log(m.q) for m in plan.members]
    np.testing.assert_allclose(np.diff(thetas), 0.5, rtol=1e-10)
    horizons = [th - budget(m.eps, m.delta) for th, m in zip(thetas, plan.members)]
    assert min(horizons) == pytest.approx(t_end + margin, rel=1e-10)
    assert all(h >= t_end for h in horizons)

    # 预算足够小时不平移
    plain = make_sweep(cfg, 3, budget=lambda eps, delta: 0.0)
    np.testing.assert_allclose([m.q for m in plain.members],
                               [math.exp(1.0), math.exp(1.5), math.exp(2.0)], rtol=1e-10)


def test_delta_sweep_alpha_from_budget():
    cfg = config.load_config()
    plan = make_delta_sweep(cfg, budget=lambda eps, delta: 1.0)
    (alpha,) = {m.alpha for m in plan.members}
    m = plan.members[0]
    assert alpha < cfg["physics"]["alpha"]
    horizon = math.log(m.eps ** 2 / alpha) / m.C_N - 1.0
    assert horizon == pytest.approx(cfg["time"]["t_end"] + cfg["sweep"]["horizon_margin"], rel=1e-10)


def test_member_budget_matches_run_horizon(tmp_path):
    cfg = config.load_config(str(CONFIG_DIR / "heat_bump.json"))
    budget = main.member_budget(cfg, cfg["physics"]["eps"], cfg["physics"]["delta"])
    cfg["time"]["t_end"] = 0.0
    result = main.run_simulation(cfg, str(tmp_path), write=False)
    p = result.setup.params
    expected = math.log(p.eps ** 2 / p.alpha) / result.setup.C_N - budget
    assert result.horizon == pytest.approx(expected, abs=1e-9)


def test_plan_errors():
    cfg = config.load_config()
    with pytest.raises(PlanError):
        make_sweep(cfg, 1)
    with pytest.raises(PlanError):
        make_sweep(cfg, 3, "quartic")
    small = config.load_config(overrides={"galerkin": {"n": 3, "N": 1}})
    with pytest.raises(PlanError):
        make_sweep(small, 4)


def test_delta_sweep():
    cfg = config.load_config()
    plan = make_delta_sweep(cfg)
    assert plan.axis == "delta"
    assert [m.delta for m in plan.members] == [1e-2, 1e-3, 1e-4]
    assert {m.N for m in plan.members} == {cfg["galerkin"]["N"]}
    cfgs = plan.member_configs(cfg)
    assert [c["initial_data"]["delta_data"] for c in cfgs] == [1e-2, 1e-3, 1e-4]

    for deltas in ([1e-2], [1e-3, 1e-2], [1e-3, 1e-3]):
        bad = config.load_config(overrides={"sweep": {"deltas": deltas}})
        with pytest.raises(PlanError):
            make_delta_sweep(bad)


def test_successive_differences(small_domain):
    times = np.array([0.0, 0.5, 1.0])
    ones = np.ones((3,) + small_domain.shape)
    zeros = np.zeros_like(ones)
    a = (small_domain, times, {"rho": ones, "psi_re": zeros, "psi_im": zeros})
    b = (small_domain, times, {"rho": 2 * ones, "psi_re": zeros, "psi_im": ones})
    (row,) = successive_differences([a, b])
    assert row["pair"] == "0-1"
    assert row["rho_L1_sup_t"] == pytest.approx(small_domain.area)
    assert row["psi_L2_sup_t"] == pytest.approx(math.sqrt(small_domain.area))
    assert row["t_max"] == 1.0


# ---------------------------------------------------------------------------
# 快照
# ---------------------------------------------------------------------------

def snapshot_file(tmp_path, domain, basis, times=(0.0, 0.1)):
    writer = SnapshotWriter(str(tmp_path / "snapshots.bin"))
    rho = ScalarField(domain, np.full(domain.shape, 1.5))
    for t in times:
        state = replace(make_state(rho, np.zeros((basis.n, 3)), basis), t=t)
        writer.write_state(state)
    return writer


def test_snapshot_series(tmp_path, small_domain):
    basis = build_basis(small_domain, 3)
    writer = snapshot_file(tmp_path, small_domain, basis)
    assert writer.count == 2
    with open(writer.path, "rb") as f:
        assert f.read(len(MAGIC)) == MAGIC
    domain, times, fields = load_snapshot_series(writer.path)
    assert domain == small_domain
    np.testing.assert_array_equal(times, [0.0, 0.1])
    assert fields["rho"].shape == (2,) + small_domain.shape
    np.testing.assert_array_equal(fields["rho"], 1.5)
    np.testing.assert_array_equal(fields["phi_x"][1], small_domain.points()[..., 0])


def test_truncated_snapshot(tmp_path, small_domain):
    writer = snapshot_file(tmp_path, small_domain, build_basis(small_domain, 3))
    data = Path(writer.path).read_bytes()
    Path(writer.path).write_bytes(data[:-10])
    with pytest.raises(SnapshotError):
        read_records(writer.path)


def test_bad_magic_and_missing(tmp_path, small_domain):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTASNAP" + bytes(16))
    with pytest.raises(SnapshotError):
        read_records(str(path))
    with pytest.raises(SnapshotError):
        read_records(str(tmp_path / "missing.bin"))
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    with pytest.raises(SnapshotError):
        load_snapshot_series(str(empty))


def test_inconsistent_times(tmp_path, small_domain):
    path = str(tmp_path / "odd.bin")
    vals = np.zeros(small_domain.shape)
    with open(path, "wb") as fh:
        write_record(fh, small_domain, "rho", "neumann0", 0.0, vals)
        write_record(fh, small_domain, "u1", "dirichlet0", 0.0, vals)
        write_record(fh, small_domain, "rho", "neumann0", 0.1, vals)
    with pytest.raises(SnapshotError):
        load_snapshot_series(path)


def test_write_table_union_of_columns(tmp_path):
    path = tmp_path / "t.csv"
    write_table(str(path), [{"a": 1}, {"b": 2, "a": 3}])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["a,b", "1,", "3,2"]


# ---------------------------------------------------------------------------
# 运行与命令行
# ---------------------------------------------------------------------------

@pytest.fixture
def zero_cfg():
    return config.load_config(str(CONFIG_DIR / "zero_state.json"))


def test_run_is_deterministic(zero_cfg, tmp_path):
    a = main.run_simulation(zero_cfg, str(tmp_path / "a"), write=False)
    b = main.run_simulation(zero_cfg, str(tmp_path / "b"), write=False)
    assert a.steps == 10
    assert a.state.t == pytest.approx(0.01)
    assert math.isinf(a.horizon)
    assert a.ledger.rows == b.ledger.rows
    assert not any(a.flags[k] for k in ("energy_residual", "mass_drift", "jacobian_bound",
                                        "negative_density"))
    assert not os.path.exists(tmp_path / "a")


def test_run_truncates_at_negative_horizon(zero_cfg, tmp_path):
    zero_cfg["physics"].update({"eps": 1e-2, "alpha": 1e-4})
    result = main.run_simulation(zero_cfg, str(tmp_path), write=False)
    assert result.horizon < 0
    assert result.steps == 0
    assert len(result.ledger) == 1


def test_run_rejects_capacity(zero_cfg, tmp_path):
    zero_cfg["galerkin"]["N"] = 4
    with pytest.raises(ValueError):
        main.run_simulation(zero_cfg, str(tmp_path), write=False)


@pytest.mark.parametrize("name", ["heat_bump.json", "vacuum_sweep.json"])
def test_regression_configs_reach_t_end_within_theory(name, tmp_path):
    cfg = config.load_config(str(CONFIG_DIR / name))
    result = main.run_simulation(cfg, str(tmp_path), write=False)
    t_end, dt = cfg["time"]["t_end"], cfg["time"]["dt"]
    assert result.horizon >= t_end
    assert result.steps == round(t_end / dt)
    assert result.state.t == pytest.approx(t_end)
    flags = result.flags
    assert not any(flags[k] for k in ("energy_residual", "mass_drift", "jacobian_bound",
                                      "negative_density"))
    assert flags["max_residual"] <= flags["residual_tol"]
    assert min(row["rho_min"] for row in result.rows["continuity"]) > 0.0
    # 非平凡的动力学: 能量确实在变
    E = result.ledger.column("E")
    assert np.max(np.abs(E - E[0])) > 0.0


def test_sweep_members_all_reach_t_end(tmp_path):
    cfg = config.load_config(str(CONFIG_DIR / "vacuum_sweep.json"), overrides={
        "domain": {"nx": 16, "ny": 16},
        "galerkin": {"n": 4, "N": 3},
        "time": {"dt": 1e-3, "t_end": 5e-3, "snapshot_every": 2, "wave_substeps": 1},
        "output_dir": str(tmp_path / "vacuum"),
    })
    budget = partial(main.member_budget, cfg)
    plan = make_sweep(cfg, 3, budget=budget)
    member_rows, diffs, flux_rows = run_plan(plan, cfg, str(tmp_path / "sweep"), workers=1)
    assert [row["status"] for row in member_rows] == ["ok"] * 3
    for row in member_rows:
        assert row["horizon"] >= cfg["time"]["t_end"]
        assert row["t_final"] == pytest.approx(cfg["time"]["t_end"])
    assert len(diffs) == 2 and all(d["t_max"] == pytest.approx(5e-3) for d in diffs)
    assert len(flux_rows) == 3

    delta_plan = make_delta_sweep(cfg, budget=budget)
    delta_rows, _, _ = run_plan(delta_plan, cfg, str(tmp_path / "sweep"), workers=1)
    assert all(row["t_final"] == pytest.approx(cfg["time"]["t_end"]) for row in delta_rows)


def test_cli_run_then_diag(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main.main(["run", "-c", str(CONFIG_DIR / "zero_state.json")]) == main.EXIT_OK
    (run_dir,) = glob.glob(os.path.join("outputs", "zero_state", "20*"))
    for name in ("meta.json", "ledger.csv", "snapshots.bin", "basis.csv", "continuity.csv",
                 "induction.csv", "nls.csv"):
        assert os.path.exists(os.path.join(run_dir, name))
    with open(os.path.join(run_dir, "meta.json"), encoding="utf-8") as f:
        meta = json.load(f)
    assert meta["steps"] == 10 and meta["horizon"] is None

    _, times, _ = load_snapshot_series(os.path.join(run_dir, "snapshots.bin"))
    np.testing.assert_allclose(times, [0.0, 0.005, 0.01])

    assert main.main(["diag", "-d", os.path.join("outputs", "zero_state"), "--strict"]) == main.EXIT_OK
    assert os.path.exists(os.path.join(run_dir, "diag.csv"))

    # 篡改末时刻密度后, 质量漂移标记触发
    snap = os.path.join(run_dir, "snapshots.bin")
    records = read_records(snap)
    t_last = max(r.t for r in records)
    with open(snap, "wb") as fh:
        for r in records:
            values = 2.0 * r.values if (r.field == "rho" and r.t == t_last) else r.values
            write_record(fh, r.domain, r.field, r.bc, r.t, values)
    assert main.main(["diag", "-d", run_dir]) == main.EXIT_OK
    assert main.main(["diag", "-d", run_dir, "--strict"]) == main.EXIT_STRICT


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main.main(["run", "-c", "missing.json"]) == main.EXIT_CONFIG
    assert main.main(["diag", "-d", str(tmp_path)]) == main.EXIT_IO
    cfg = {"schema_version": 1, "galerkin": {"n": 3, "N": 1},
           "sweep": {"rule": "cubic"}, "domain": {"nx": 16, "ny": 16}}
    path = write_json(tmp_path / "sweep.json", cfg)
    assert main.main(["sweep", "-c", path, "--levels", "3"]) == main.EXIT_CONFIG
