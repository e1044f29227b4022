# aurora/solver/induction.py
"""
感应方程 H_t - curl(u x H) = -curl(nu curl H), div H = 0。

显式计算 curl(u x H), 按分量奇偶性用正弦/余弦变换做精确扩散, 最后做散度清理。
扩散使用中心差分符号, 因此 u = 0 时 d/dt 1/2||H||^2 = -nu ||curl H||^2 在离散意义下精确成立。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from solver import spectral
from solver.continuity import check_cfl
from solver.errors import ParameterError, PreconditionError, ShapeError
from solver.fields import (BC_PARITY, MAGNETIC_BCS, VectorField3, curl, divergence,
                           helmholtz_clean, integrate_array)

logger = logging.getLogger(__name__)

DIV_TOL_IN = 1e-6


@dataclass(frozen=True)
class InductionParams:
    nu: float
    dt: float
    c_adv: float = 0.25

    def __post_init__(self):
        if self.nu <= 0:
            raise ParameterError(f"磁扩散系数必须为正: nu={self.nu}")
        if self.dt <= 0:
            raise ParameterError(f"时间步长必须为正: dt={self.dt}")


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """逐点叉积, 输入形状 (3, ...)。"""
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def div_residual(H: VectorField3) -> float:
    """离散散度的 L2 范数。"""
    div = divergence(H)
    return float(np.sqrt(integrate_array(div ** 2, H.domain)))


def step_magnetic(H: VectorField3, u: VectorField3, p: InductionParams) -> VectorField3:
    """
    一步 IMEX 推进磁场。

    Args:
        H (VectorField3): 当前磁场, 边界标签为 MAGNETIC_BCS。
        u (VectorField3): 网格速度。
        p (InductionParams): nu, dt。

    Returns:
        VectorField3: 新磁场, 离散散度在舍入误差内为 0。
    """
    d = H.domain
    if u.domain != d:
        raise ShapeError("磁场与速度的网格不一致")
    if tuple(H.bcs) != MAGNETIC_BCS:
        raise ShapeError(f"磁场边界标签应为 {MAGNETIC_BCS}, 得到 {H.bcs}")
    res = div_residual(H)
    if res > DIV_TOL_IN:
        raise PreconditionError(f"输入磁场散度过大: {res:.3e} > {DIV_TOL_IN}")
    check_cfl(u.values, p.dt, min(d.hx, d.hy), p.c_adv)

    values = H.values
    if np.any(u.values):
        E = VectorField3(d, cross(u.values, H.values), ("none", "none", "none"))
        values = values + p.dt * curl(E)

    out = np.empty_like(values)
    for i, bc in enumerate(H.bcs):
        out[i] = spectral.diffuse(values[i], d, BC_PARITY[bc], p.nu * p.dt, symbol="centered")
    return helmholtz_clean(VectorField3(d, out, H.bcs))


def magnetic_row(t: float, H: VectorField3, nu: float, dt: float) -> dict:
    """诊断行: t, ||H||^2, 散度残差, nu||curl H||^2 dt 增量。"""
    J = curl(H)
    return {
        "t": t,
        "H_sq": integrate_array(np.sum(H.values ** 2, axis=0), H.domain),
        "div_residual": div_residual(H),
        "dissipation_increment": nu * dt * integrate_array(np.sum(J ** 2, axis=0), H.domain),
    }
