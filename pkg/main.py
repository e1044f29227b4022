# aurora/main.py

import argparse
import copy
import datetime
import importlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

# 从配置文件导入所有配置
import config

from my_utils.initial_data import approx_initial_state
from my_utils.snapshot_io import SnapshotWriter, write_table
from solver.coupling import InteractionSpec
from solver.diagnostics import (EnergyLedger, HorizonInputs, bound_R, energy, energy_residual,
                                horizon_TN)
from solver.errors import (AuroraError, CapacityError, ConfigError, ParameterError, PlanError,
                           ShapeError, SnapshotError)
from solver.fields import integrate_array
from solver.galerkin import PhysParams, StepSettings, coupled_step, initial_state
from solver.geometry import Domain, build_basis, grad_sup_constant, write_basis_table
from solver.lagrangian import jacobian_bound_check

logger = logging.getLogger("aurora")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_STRICT = 5


def get_scenario_instance(cfg: dict):
    """动态导入并实例化所选的初始数据场景。"""
    name = cfg["initial_data"]["scenario"]
    try:
        module_name = config.SCENARIO_CONFIGS[name]["module_name"]
        scenario_module = importlib.import_module(module_name)
        ScenarioClass = getattr(scenario_module, name)
    except (ImportError, KeyError, AttributeError) as e:
        raise ConfigError(f"错误: 无法加载场景 '{name}'。请检查 'config.py' 和 'scenarios' 文件夹。详细错误: {e}") from e
    logger.info("正在实例化场景: %s", name)
    return ScenarioClass(**config.scenario_params(cfg))


@dataclass
class RunSetup:
    domain: Domain
    params: PhysParams
    spec: InteractionSpec
    settings: StepSettings
    state: object
    C_N: float
    deficit_measure: float


@dataclass
class RunResult:
    out_dir: str
    ledger: EnergyLedger
    state: object
    setup: RunSetup
    E0: float
    R: float
    horizon: float
    steps: int
    rows: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)


def build_setup(cfg: dict) -> RunSetup:
    """由配置构造网格、参数、初始数据与初始状态。"""
    domain = Domain(**cfg["domain"])
    n, N = cfg["galerkin"]["n"], cfg["galerkin"]["N"]
    if not (1 <= N <= n):
        raise CapacityError(f"要求 1 <= N <= n, 得到 N={N}, n={n}")
    basis = build_basis(domain, n)
    params = PhysParams(**cfg["physics"])
    spec = InteractionSpec(alpha=params.alpha, **cfg["interaction"])

    rng = np.random.default_rng(cfg["seed"])
    fields = get_scenario_instance(cfg).build(domain, rng)
    init = cfg["initial_data"]
    approx = approx_initial_state(fields, init["delta_data"], params.beta, init["smooth_scale"])
    state = initial_state(approx.rho, approx.m, approx.H, approx.psi, basis, n)

    t = cfg["time"]
    settings = StepSettings(
        N=N,
        c_adv=cfg["continuity"]["c_adv"],
        limiter=cfg["continuity"]["limiter"],
        exit_tol=cfg["flow"]["exit_tol"],
        rho_floor=cfg["flow"]["rho_floor"],
        relabel_every=cfg["flow"]["relabel_every"],
        wave_substeps=t["wave_substeps"],
    )
    C_N = grad_sup_constant(basis, N, cfg["geometry"]["grad_refine"])
    return RunSetup(domain, params, spec, settings, state, C_N, approx.deficit_measure)


def member_budget(cfg: dict, eps: float, delta: float) -> float:
    """
    (E0 + eps^{1/2} R) / mu: 由 (eps, delta) 对应的初始状态算出, T^N 从对数项中扣除的部分。

    耦合能按 alpha = 0 计入; 扫描中的 alpha 极小, 差额由 sweep.horizon_margin 吸收。
    """
    member = copy.deepcopy(cfg)
    member["physics"]["eps"] = eps
    member["physics"]["delta"] = delta
    member["initial_data"]["delta_data"] = delta
    setup = build_setup(member)
    p = setup.params
    E0 = energy(setup.state, p, replace(setup.spec, alpha=0.0), setup.settings.rho_floor)["E"]
    R = bound_R(setup.state.rho, E0, p.eps, p.r)
    budget = (E0 + math.sqrt(p.eps) * R) / p.mu
    logger.info("成员预算: eps=%.4g delta=%.1e E0=%.6g R=%.6g -> %.6g", eps, delta, E0, R, budget)
    return budget


def compute_flags(ledger: EnergyLedger, mass: np.ndarray, params: PhysParams, R: float,
                  cfg: dict, jacobian_ok: bool, rho_min: float) -> dict:
    """诊断标记: 能量残差、质量漂移、Jacobian 界、负密度。"""
    diag = cfg["diagnostics"]
    tol = diag["tol_factor"] * max(abs(ledger.E0), 1e-300)
    residual = energy_residual(ledger, params.eps, R)
    drift = float(np.max(np.abs(mass - mass[0])) / max(abs(mass[0]), 1e-300))
    return {
        "energy_residual": bool(np.max(residual) > tol),
        "mass_drift": bool(drift > diag["mass_tol"]),
        "jacobian_bound": not jacobian_ok,
        "negative_density": bool(rho_min < 0),
        "max_residual": float(np.max(residual)),
        "residual_tol": tol,
        "max_mass_drift": drift,
    }


def run_simulation(cfg: dict, out_dir: str, write: bool = True) -> RunResult:
    """
    执行一次模拟, 推进到 min(t_end, T^N), 并写出账本、逐模块诊断表与快照。

    Args:
        cfg (dict): 完整配置。
        out_dir (str): 输出目录。
        write (bool): 是否写文件。

    Returns:
        RunResult: 账本、末状态、视界与诊断标记。
    """
    setup = build_setup(cfg)
    params, spec, state = setup.params, setup.spec, setup.state
    t_cfg = cfg["time"]
    dt = t_cfg["dt"]

    ledger = EnergyLedger()
    ledger.append(energy(state, params, spec, setup.settings.rho_floor))
    E0 = ledger.E0
    R = bound_R(state.rho, E0, params.eps, params.r)

    horizon = math.inf
    if params.alpha > 0 and params.eps > 0:
        horizon = horizon_TN(HorizonInputs(setup.C_N, params.eps, params.alpha, params.mu, E0, R))
    t_stop = t_cfg["t_end"]
    settings = setup.settings
    if t_cfg["horizon_guard"] and horizon < t_stop:
        logger.warning("时间视界 T^N=%.6g 小于 t_end=%.6g, 运行在 T^N 处截断", horizon, t_stop)
        t_stop = max(horizon, 0.0)
    if t_cfg["horizon_guard"] and math.isfinite(horizon):
        settings = replace(settings, horizon=horizon)
    steps = int(math.floor(t_stop / dt + 1e-9))

    writer = None
    if write:
        os.makedirs(out_dir, exist_ok=True)
        write_basis_table(state.basis, os.path.join(out_dir, "basis.csv"))
        writer = SnapshotWriter(os.path.join(out_dir, "snapshots.bin"))
        writer.write_state(state)

    rows = {"continuity": [], "induction": [], "nls": []}
    mass = [integrate_array(state.rho.values, state.domain)]
    rho_min = float(state.rho.values.min())
    every = t_cfg["snapshot_every"]
    logger.info("开始推进: dt=%.3g, 步数=%d, T^N=%.6g, C_N=%.6g", dt, steps, horizon, setup.C_N)
    for k in range(1, steps + 1):
        state = coupled_step(state, params, spec, dt, settings)
        ledger.append(energy(state, params, spec, settings.rho_floor))
        for name in rows:
            rows[name].append(state.last_rows[name])
        mass.append(state.last_rows["continuity"]["mass"])
        rho_min = min(rho_min, state.last_rows["continuity"]["rho_min"])
        if writer is not None and (k % every == 0 or k == steps):
            writer.write_state(state)
        if k % max(1, steps // 10) == 0:
            logger.info("  步 %d/%d, t=%.4g, E=%.8g", k, steps, state.t, ledger.rows[-1]["E"])

    ledger.validate()
    jac_ok, margin = jacobian_bound_check(state.flow, setup.C_N, state.u_h1_history)
    flags = compute_flags(ledger, np.array(mass), params, R, cfg, jac_ok, rho_min)
    flags["jacobian_margin"] = margin

    result = RunResult(out_dir, ledger, state, setup, E0, R, horizon, steps, rows, flags)
    if write:
        ledger.to_csv(os.path.join(out_dir, "ledger.csv"))
        for name, table in rows.items():
            write_table(os.path.join(out_dir, f"{name}.csv"), table)
        meta = {
            "config": cfg,
            "E0": E0,
            "R": R,
            "C_N": setup.C_N,
            "horizon": horizon if math.isfinite(horizon) else None,
            "steps": steps,
            "t_final": state.t,
            "deficit_measure": setup.deficit_measure,
            "flags": flags,
        }
        with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2, ensure_ascii=False)
    return result


def print_run_summary(result: RunResult):
    print("-" * 80)
    print("运行完成！")
    print(f"输出目录: {result.out_dir}")
    print(f"步数: {result.steps}, 末时刻 t = {result.state.t:.6g}")
    print(f"E(0) = {result.E0:.10g}, R = {result.R:.6g}, T^N = {result.horizon:.6g}")
    last = result.ledger.rows[-1]
    for key in ("kinetic", "pressure", "artificial", "magnetic", "wave_kinetic", "wave_quartic",
                "coupling", "dissipation", "density_dissipation", "E"):
        print(f"  {key:<20}: {last[key]:.10g}")
    print("诊断标记:")
    for key, value in result.flags.items():
        print(f"  {key:<20}: {value}")
    print("-" * 80)


def exit_code_for(err: BaseException) -> int:
    if isinstance(err, (ConfigError, ParameterError, PlanError, CapacityError, ShapeError)):
        return EXIT_CONFIG
    if isinstance(err, (SnapshotError, OSError)):
        return EXIT_IO
    return EXIT_NUMERICAL


def cmd_run(args) -> int:
    cfg = config.load_config(args.config)
    config.print_config(cfg)
    stamp = datetime.datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    out_dir = os.path.join(cfg["output_dir"], stamp)
    result = run_simulation(cfg, out_dir)
    print_run_summary(result)
    raised = [k for k in ("energy_residual", "mass_drift", "jacobian_bound", "negative_density")
              if result.flags[k]]
    if raised:
        print(f"警告: 诊断标记被触发: {raised}")
        if args.strict:
            return EXIT_STRICT
    return EXIT_OK


def cmd_sweep(args) -> int:
    import sweep
    cfg = config.load_config(args.config)
    config.print_config(cfg)
    return sweep.run_sweep(cfg, levels=args.levels, axis=args.axis, strict=args.strict,
                           workers=args.workers)


def cmd_diag(args) -> int:
    import diag
    return diag.run_diag(args.dir, strict=args.strict)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aurora", description="正则化 MHD-NLS 格式的运行与诊断")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出 DEBUG 级别日志")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="执行一次模拟")
    p_run.add_argument("-c", "--config", required=True, help="JSON 配置文件")
    p_run.add_argument("--strict", action="store_true", help="诊断标记触发时返回非零退出码")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="执行参数扫描并输出收敛表")
    p_sweep.add_argument("-c", "--config", required=True, help="JSON 配置文件")
    p_sweep.add_argument("--levels", type=int, default=None, help="扫描层数 (缺省取配置)")
    p_sweep.add_argument("--axis", choices=["eps", "delta", "both"], default="eps",
                         help="扫描轴: (eps, alpha, N), delta 或两者依次执行")
    p_sweep.add_argument("--workers", type=int, default=None, help="并行进程数 (缺省取配置)")
    p_sweep.add_argument("--strict", action="store_true", help="诊断标记触发时返回非零退出码")
    p_sweep.set_defaults(func=cmd_sweep)

    p_diag = sub.add_parser("diag", help="由快照重新计算诊断量")
    p_diag.add_argument("-d", "--dir", default="outputs", help="运行目录或其上级目录")
    p_diag.add_argument("--strict", action="store_true", help="诊断标记触发时返回非零退出码")
    p_diag.set_defaults(func=cmd_diag)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    try:
        return args.func(args)
    except (AuroraError, OSError) as e:
        code = exit_code_for(e)
        print(f"错误: {e}")
        logger.debug("详细错误", exc_info=True)
        return code


if __name__ == '__main__':
    sys.exit(main())
