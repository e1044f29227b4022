# aurora/sweep.py
# 参数扫描: 按计划运行各成员, 输出相邻成员之间的差异表与有效粘性通量探针表

import datetime
import functools
import logging
import multiprocessing
import os

import numpy as np

from my_utils.snapshot_io import load_snapshot_series, write_table
from my_utils.sweep_plan import SweepPlan, make_delta_sweep, make_sweep
from solver.diagnostics import RunSnapshots, space_window, time_window, viscous_flux_probe
from solver.errors import AuroraError
from solver.fields import integrate_array
from solver.galerkin import PhysParams

logger = logging.getLogger("aurora.sweep")

EXIT_OK = 0
EXIT_STRICT = 5


def run_member(cfg: dict) -> dict:
    """在子进程中运行一个成员, 返回摘要 (不回传大数组)。"""
    from main import run_simulation
    try:
        result = run_simulation(cfg, cfg["output_dir"])
    except AuroraError as e:
        logger.error("成员 %s 运行失败: %s", cfg["output_dir"], e)
        return {"out_dir": cfg["output_dir"], "status": f"failed: {e}"}
    summary = {
        "out_dir": result.out_dir,
        "status": "ok",
        "t_final": result.state.t,
        "horizon": result.horizon,
        "E0": result.E0,
        "E_final": result.ledger.rows[-1]["E"],
    }
    summary.update({k: v for k, v in result.flags.items() if isinstance(v, bool)})
    return summary


def _execute(configs, workers: int):
    if workers <= 1:
        return [run_member(cfg) for cfg in configs]
    ctx = multiprocessing.get_context("spawn")
    with ctx.Pool(processes=workers) as pool:
        return pool.map(run_member, configs)


def _common_times(series_list):
    times = set(np.round(series_list[0][1], 12))
    for _, t, _ in series_list[1:]:
        times &= set(np.round(t, 12))
    return np.array(sorted(times))


def _select(times: np.ndarray, fields: dict, common: np.ndarray, name: str) -> np.ndarray:
    idx = [int(np.argmin(np.abs(times - t))) for t in common]
    return fields[name][idx]


def successive_differences(series_list) -> list:
    """
    相邻成员之间的差异: sup_t ||rho_k - rho_{k+1}||_{L1} 与 sup_t ||psi_k - psi_{k+1}||_{L2},
    取各成员公共快照时间。
    """
    common = _common_times(series_list)
    rows = []
    for k in range(len(series_list) - 1):
        (d0, t0, f0), (d1, t1, f1) = series_list[k], series_list[k + 1]
        if d0 != d1:
            raise AuroraError("相邻成员的网格不一致, 无法比较")
        r0, r1 = _select(t0, f0, common, "rho"), _select(t1, f1, common, "rho")
        p0 = _select(t0, f0, common, "psi_re") + 1j * _select(t0, f0, common, "psi_im")
        p1 = _select(t1, f1, common, "psi_re") + 1j * _select(t1, f1, common, "psi_im")
        rho_l1 = max(integrate_array(np.abs(a - b), d0) for a, b in zip(r0, r1))
        psi_l2 = max(np.sqrt(integrate_array(np.abs(a - b) ** 2, d0)) for a, b in zip(p0, p1))
        rows.append({"pair": f"{k}-{k + 1}", "rho_L1_sup_t": rho_l1, "psi_L2_sup_t": psi_l2,
                     "t_max": float(common[-1]) if len(common) else 0.0})
    return rows


def probe_table(plan: SweepPlan, series_list, cfgs) -> list:
    rows = []
    for member, (domain, times, fields), cfg in zip(plan.members, series_list, cfgs):
        if len(times) < 2:
            continue
        snaps = RunSnapshots(domain, times, fields["rho"],
                             np.stack([fields["u1"], fields["u2"], fields["u3"]], axis=1))
        zeta = time_window(times[0], times[-1])
        eta = space_window((0.5 * domain.Lx, 0.5 * domain.Ly), 0.4 * min(domain.Lx, domain.Ly))
        params = PhysParams(**cfg["physics"])
        rows.append({"eps": member.eps, "alpha": member.alpha, "N": member.N, "delta": member.delta,
                     "zeta_id": "bump_full", "eta_id": "center_0.4",
                     "probe": viscous_flux_probe(snaps, params, zeta, eta)})
    return rows


def _decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def run_plan(plan: SweepPlan, base_cfg: dict, sweep_dir: str, workers: int):
    """执行一个扫描计划并写出表格, 返回 (成员摘要, 差异表, 探针表)。"""
    cfgs = plan.member_configs({**base_cfg, "output_dir": sweep_dir})
    print("-" * 80)
    print(f"扫描轴: {plan.axis}, 规则: {plan.rule}, 成员数: {len(plan)}, 并行进程数: {workers}")
    print("-" * 80)
    summaries = _execute(cfgs, workers)

    member_rows = []
    for member, summary in zip(plan.members, summaries):
        row = member.to_dict()
        row.update(summary)
        member_rows.append(row)
    write_table(os.path.join(sweep_dir, f"{plan.axis}_members.csv"), member_rows)

    ok = [s["status"] == "ok" for s in summaries]
    if not all(ok):
        print(f"警告: {ok.count(False)} 个成员运行失败, 跳过差异表")
        return member_rows, [], []
    series = [load_snapshot_series(os.path.join(s["out_dir"], "snapshots.bin")) for s in summaries]
    diffs = successive_differences(series)
    probes = probe_table(plan, series, cfgs)
    write_table(os.path.join(sweep_dir, f"{plan.axis}_convergence.csv"), diffs)
    write_table(os.path.join(sweep_dir, f"{plan.axis}_probe.csv"), probes)
    return member_rows, diffs, probes


def print_sweep_statistics(axis: str, member_rows, diffs, probes):
    """按类别打印扫描统计。"""
    print("\n" + "=" * 80)
    print(f"扫描统计 ({axis})")
    print("=" * 80)
    print(f"\n{'成员':<6} {'eps':>10} {'alpha':>12} {'N':>3} {'delta':>9} {'q':>10} {'t_final':>9} 状态")
    print("-" * 80)
    for row in member_rows:
        print(f"{row['member_id']:<6} {row['eps']:>10.3e} {row['alpha']:>12.3e} {row['N']:>3d} "
              f"{row['delta']:>9.1e} {row['q']:>10.5g} {row.get('t_final', float('nan')):>9.4g} "
              f"{row['status']}")
    if diffs:
        print(f"\n{'相邻成员':<10} {'sup_t ||drho||_L1':>20} {'sup_t ||dpsi||_L2':>20}")
        print("-" * 80)
        for row in diffs:
            print(f"{row['pair']:<10} {row['rho_L1_sup_t']:>20.6e} {row['psi_L2_sup_t']:>20.6e}")
    if probes:
        print(f"\n{'eps':>10} {'N':>3} {'delta':>9} {'探针值':>16}")
        print("-" * 80)
        for row in probes:
            print(f"{row['eps']:>10.3e} {row['N']:>3d} {row['delta']:>9.1e} {row['probe']:>16.8e}")
    print("=" * 80)


def run_sweep(cfg: dict, levels: int = None, axis: str = "eps", strict: bool = False,
              workers: int = None) -> int:
    """
    执行 (eps, alpha, N) 扫描和/或 delta 扫描。

    Args:
        cfg (dict): 基础配置。
        levels (int): 层数, None 取 cfg['sweep']['levels']。
        axis (str): 'eps', 'delta' 或 'both'。
        strict (bool): 任一成员的诊断标记被触发或差异不递减时返回 EXIT_STRICT。
        workers (int): 并行进程数, None 取 cfg['sweep']['workers']。

    Returns:
        int: 退出码。
    """
    levels = levels or cfg["sweep"]["levels"]
    workers = workers or cfg["sweep"]["workers"]
    stamp = datetime.datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    sweep_dir = os.path.join(cfg["output_dir"], f"sweep_{stamp}")
    os.makedirs(sweep_dir, exist_ok=True)

    from main import member_budget
    budget = functools.partial(member_budget, cfg)
    plans = []
    if axis in ("eps", "both"):
        plans.append(make_sweep(cfg, levels, budget=budget))
    if axis in ("delta", "both"):
        plans.append(make_delta_sweep(cfg, budget=budget))

    problems = []
    for plan in plans:
        member_rows, diffs, probes = run_plan(plan, cfg, sweep_dir, workers)
        print_sweep_statistics(plan.axis, member_rows, diffs, probes)
        for row in member_rows:
            if row["status"] != "ok":
                problems.append(f"{plan.axis}/{row['member_id']}: {row['status']}")
            for flag in ("energy_residual", "mass_drift", "jacobian_bound", "negative_density"):
                if row.get(flag):
                    problems.append(f"{plan.axis}/{row['member_id']}: {flag}")
        if diffs and not _decreasing([d["rho_L1_sup_t"] for d in diffs]):
            problems.append(f"{plan.axis}: 密度差异不递减")
        if diffs and not _decreasing([d["psi_L2_sup_t"] for d in diffs]):
            problems.append(f"{plan.axis}: 波函数差异不递减")

    print(f"\n扫描结果已保存至: {sweep_dir}")
    if problems:
        print("警告: 扫描中出现以下问题:")
        for p in problems:
            print(f"  - {p}")
        if strict:
            return EXIT_STRICT
    return EXIT_OK
