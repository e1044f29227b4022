# aurora/diag.py
# 由已保存的快照重新计算诊断量, 不依赖运行时内存状态

import glob
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from my_utils.snapshot_io import load_snapshot_series, write_table
from solver.coupling import InteractionSpec
from solver.diagnostics import (EnergyLedger, RunSnapshots, energy, energy_residual,
                                entropy_slack, renorm_residual, space_window, time_window,
                                viscous_flux_probe)
from solver.errors import PreconditionError, SnapshotError
from solver.fields import MAGNETIC_BCS, ComplexField, ScalarField, VectorField3, integrate_array
from solver.galerkin import PhysParams
from solver.geometry import Domain
from solver.lagrangian import FlowState, jacobian_bound_check, jacobian_fd_determinant

logger = logging.getLogger("aurora.diag")

EXIT_OK = 0
EXIT_STRICT = 5


@dataclass
class SnapshotView:
    """由快照数组重建的只读状态, 字段名与 SystemState 一致, 供 energy() 使用。"""
    domain: Domain
    rho: ScalarField
    u: VectorField3
    H: VectorField3
    psi: ComplexField
    flow: FlowState
    t: float
    dissipation: float = 0.0
    density_dissipation: float = 0.0


def find_latest_run_dir(path: str):
    """
    查找最新的运行目录 (格式: YYYY-MM-DD_HH-MM-SS)。
    path 本身含有 meta.json 时直接返回 path。
    """
    if os.path.exists(os.path.join(path, "meta.json")):
        return path
    run_dirs = [d for d in glob.glob(os.path.join(path, "20*"))
                if os.path.exists(os.path.join(d, "meta.json"))]
    if not run_dirs:
        return None

    # 按目录名排序，取最新的
    run_dirs.sort(reverse=True)
    return run_dirs[0]


def views_from_series(domain: Domain, times: np.ndarray, fields: dict, ledger: EnergyLedger):
    """把快照序列转为 SnapshotView 列表, 累积耗散取账本中时间最近的行。"""
    ledger_t = ledger.column("t") if len(ledger) else np.zeros(0)
    views = []
    for k, t in enumerate(times):
        diss = dens = 0.0
        if len(ledger_t):
            j = int(np.argmin(np.abs(ledger_t - t)))
            diss = ledger.rows[j]["dissipation"]
            dens = ledger.rows[j]["density_dissipation"]
        phi = np.stack([fields["phi_x"][k], fields["phi_y"][k]], axis=-1)
        Y = np.stack([fields["Y_x"][k], fields["Y_y"][k]], axis=-1)
        views.append(SnapshotView(
            domain=domain,
            rho=ScalarField(domain, fields["rho"][k]),
            u=VectorField3(domain, np.stack([fields["u1"][k], fields["u2"][k], fields["u3"][k]])),
            H=VectorField3(domain, np.stack([fields["H1"][k], fields["H2"][k], fields["H3"][k]]),
                           MAGNETIC_BCS),
            psi=ComplexField(domain, fields["psi_re"][k] + 1j * fields["psi_im"][k]),
            flow=FlowState(domain, phi, fields["a"][k], Y, fields["A"][k], float(t)),
            t=float(t),
            dissipation=diss,
            density_dissipation=dens,
        ))
    return views


def _u_h1_increments(views) -> list:
    grads = []
    for v in views:
        g = 0.0
        for c in range(3):
            gx, gy = np.gradient(v.u.values[c], v.domain.hx, v.domain.hy, edge_order=2)
            g = g + gx ** 2 + gy ** 2
        grads.append(integrate_array(g, v.domain))
    ts = [v.t for v in views]
    return [0.5 * (t1 - t0) * (g0 + g1) for t0, t1, g0, g1 in zip(ts, ts[1:], grads, grads[1:])]


def recompute(run_dir: str) -> dict:
    """
    由 run_dir 中的 meta.json、ledger.csv 与 snapshots.bin 重新计算诊断量。

    Args:
        run_dir (str): 运行目录。

    Returns:
        dict: 诊断值与标记。
    """
    meta_path = os.path.join(run_dir, "meta.json")
    try:
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SnapshotError(f"无法读取 {meta_path}: {e}") from e
    cfg = meta["config"]
    params = PhysParams(**cfg["physics"])
    spec = InteractionSpec(alpha=params.alpha, **cfg["interaction"])
    rho_floor = cfg["flow"]["rho_floor"]

    ledger = EnergyLedger.from_csv(os.path.join(run_dir, "ledger.csv"))
    domain, times, fields = load_snapshot_series(os.path.join(run_dir, "snapshots.bin"))
    views = views_from_series(domain, times, fields, ledger)

    recomputed = EnergyLedger()
    for v in views:
        recomputed.append(energy(v, params, spec, rho_floor))
    residual = energy_residual(recomputed, params.eps, meta["R"])
    tol = cfg["diagnostics"]["tol_factor"] * max(abs(recomputed.E0), 1e-300)

    mass = np.array([integrate_array(v.rho.values, domain) for v in views])
    drift = float(np.max(np.abs(mass - mass[0])) / max(abs(mass[0]), 1e-300))
    rho_min = float(fields["rho"].min())

    last = views[-1]
    det = jacobian_fd_determinant(last.flow)
    jac_identity = float(np.max(np.abs(det - last.flow.jacobian)))
    jac_ok, jac_margin = jacobian_bound_check(last.flow, meta["C_N"], _u_h1_increments(views))

    out = {
        "run_dir": run_dir,
        "snapshots": len(views),
        "t_final": float(times[-1]),
        "max_residual": float(np.max(residual)),
        "residual_tol": tol,
        "max_mass_drift": drift,
        "rho_min": rho_min,
        "jacobian_identity_sup": jac_identity,
        "jacobian_margin": jac_margin,
    }

    snaps = RunSnapshots(domain, times, fields["rho"],
                         np.stack([fields["u1"], fields["u2"], fields["u3"]], axis=1))
    if len(times) >= 3:
        zeta = time_window(times[0], times[-1])
        eta = space_window((0.5 * domain.Lx, 0.5 * domain.Ly), 0.4 * min(domain.Lx, domain.Ly))
        out["viscous_flux_probe"] = viscous_flux_probe(snaps, params, zeta, eta)
        try:
            out["renorm_residual"] = renorm_residual(snaps, [(zeta, eta)])
        except PreconditionError as e:
            logger.warning("跳过重整化残差: %s", e)
        if rho_min > 0:
            out["entropy_slack_min"] = float(np.min(entropy_slack(snaps)))

    out["flags"] = {
        "energy_residual": bool(np.max(residual) > tol),
        "mass_drift": bool(drift > cfg["diagnostics"]["mass_tol"]),
        "jacobian_bound": not jac_ok,
        "negative_density": rho_min < 0,
    }
    return out


def run_diag(path: str, strict: bool = False) -> int:
    """diag 子命令: 定位最新运行目录, 重新计算并打印诊断量。"""
    run_dir = find_latest_run_dir(path)
    if run_dir is None:
        raise SnapshotError(f"在 '{path}' 下没有找到包含 meta.json 的运行目录")
    print("-" * 80)
    print(f"正在重新计算诊断量: {run_dir}")
    print("-" * 80)
    out = recompute(run_dir)
    flags = out.pop("flags")

    for key, value in out.items():
        print(f"  {key:<24}: {value}")
    print("诊断标记:")
    for key, value in flags.items():
        print(f"  {key:<24}: {value}")
    write_table(os.path.join(run_dir, "diag.csv"), [{**out, **{f"flag_{k}": v for k, v in flags.items()}}])
    print("-" * 80)

    raised = [k for k, v in flags.items() if v]
    if raised:
        print(f"警告: 诊断标记被触发: {raised}")
        if strict:
            return EXIT_STRICT
    return EXIT_OK
