# aurora/my_utils/initial_data.py

import logging
import math
from dataclasses import dataclass

import numpy as np

from solver.diagnostics import mollify
from solver.errors import ParameterError, PreconditionError
from solver.fields import (ComplexField, ScalarField, VectorField3, apply_bc, helmholtz_clean,
                           integrate_array)

logger = logging.getLogger(__name__)


@dataclass
class ApproxInitialData:
    """正则化后的初始数据, 以及集合 {rho0_delta < rho0} 的测度。"""
    rho: ScalarField
    m: VectorField3
    H: VectorField3
    psi: ComplexField
    deficit_measure: float


def approx_initial_data(rho0: ScalarField, m0: VectorField3, delta: float, beta: float,
                        smooth_scale: float = 1.0):
    """
    构造近似初始密度与动量。

    Args:
        rho0 (ScalarField): 原始密度, 可含真空。
        m0 (VectorField3): 原始动量。
        delta (float): 人工压力系数, 同时作为密度下限。
        beta (float): 人工压力指数, 决定上限 delta^{-1/(2 beta)}。
        smooth_scale (float): 磨光半径 omega = smooth_scale * sqrt(delta); omega <= 2h 时不磨光。

    Returns:
        tuple: (rho0_delta, m0_delta)
    """
    if delta <= 0:
        raise ParameterError(f"delta 必须为正, 得到 {delta}")
    if np.any(rho0.values < 0):
        raise PreconditionError("原始密度存在负值")

    d = rho0.domain
    base = ScalarField(d, rho0.values, "neumann0")
    omega = smooth_scale * math.sqrt(delta)
    if omega > 2 * d.h:
        base = mollify(base, omega)
    else:
        logger.info("磨光半径 %.3e <= 2h, 跳过磨光", omega)

    upper = delta ** (-1.0 / (2.0 * beta))
    rho = np.clip(base.values, delta, upper)
    keep = rho >= rho0.values
    m = np.where(keep[None], m0.values, 0.0)
    return ScalarField(d, rho, "neumann0"), VectorField3(d, m, m0.bcs)


def deficit_measure(rho_delta: ScalarField, rho0: ScalarField) -> float:
    """|{x : rho0_delta(x) < rho0(x)}|, 按求积权重计算。"""
    return integrate_array((rho_delta.values < rho0.values).astype(float), rho0.domain)


def lgamma_distance(rho_delta: ScalarField, rho0: ScalarField, gamma: float) -> float:
    """||rho0_delta - rho0||_{L^gamma}。"""
    diff = np.abs(rho_delta.values - rho0.values) ** gamma
    return integrate_array(diff, rho0.domain) ** (1.0 / gamma)


def approx_initial_state(fields, delta: float, beta: float, smooth_scale: float = 1.0) -> ApproxInitialData:
    """
    在 approx_initial_data 的基础上处理磁场与波函数:
    H0 做散度清理, psi0 强制 Dirichlet 边界后直接传递。

    Args:
        fields (InitialFields): 场景给出的原始数据。
        delta (float): 人工压力系数。
        beta (float): 人工压力指数。
        smooth_scale (float): 磨光尺度。

    Returns:
        ApproxInitialData: 正则化数据。
    """
    rho, m = approx_initial_data(fields.rho0, fields.m0, delta, beta, smooth_scale)
    H = helmholtz_clean(fields.H0)
    psi_vals = fields.psi0.values.copy()
    psi_vals[[0, -1], :] = 0.0
    psi_vals[:, [0, -1]] = 0.0
    m = VectorField3(m.domain, np.stack([apply_bc(c, "dirichlet0") for c in m.values]), m.bcs)
    return ApproxInitialData(
        rho=rho,
        m=m,
        H=H,
        psi=ComplexField(fields.psi0.domain, psi_vals),
        deficit_measure=deficit_measure(rho, fields.rho0),
    )
