# aurora/solver/continuity.py
"""
正则化连续性方程 rho_t + div(rho u) = eps * Laplace(rho), Neumann 边界。

一步 IMEX: 显式守恒型迎风对流 (节点控制体, 边界为半控制体, 壁面通量为 0),
随后用 DCT-I 对角化的五点 Laplace 做向后 Euler 扩散, 保持正性与极值。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from solver import spectral
from solver.errors import ParameterError, PreconditionError, ShapeError, StepSizeError
from solver.fields import ScalarField, VectorField3, integrate_array

logger = logging.getLogger(__name__)

LIMITERS = ("upwind", "minmod")


@dataclass(frozen=True)
class ContinuityParams:
    eps: float
    dt: float
    c_adv: float = 0.25
    limiter: str = "upwind"

    def __post_init__(self):
        if self.dt <= 0:
            raise ParameterError(f"时间步长必须为正: dt={self.dt}")
        if self.eps < 0:
            raise ParameterError(f"人工粘性必须非负: eps={self.eps}")
        if self.limiter not in LIMITERS:
            raise ParameterError(f"未知的限制器: {self.limiter} (可选 {LIMITERS})")


def check_cfl(u: np.ndarray, dt: float, h: float, c_adv: float) -> float:
    """检查 dt * ||u||_inf <= c_adv * h, 返回 Courant 数。"""
    umax = float(np.max(np.abs(u[:2]))) if u.size else 0.0
    courant = dt * umax / h
    if courant > c_adv:
        raise StepSizeError(f"CFL 条件不满足: dt*|u|/h = {courant:.4g} > {c_adv}")
    return courant


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_flux(rho: np.ndarray, vel: np.ndarray, axis: int, limiter: str) -> np.ndarray:
    """沿 axis 的内部面通量, 第 i 个元素对应节点 i 与 i+1 之间的面。"""
    r = np.moveaxis(rho, axis, 0)
    v = np.moveaxis(vel, axis, 0)
    uf = 0.5 * (v[:-1] + v[1:])
    left, right = r[:-1], r[1:]
    if limiter == "minmod":
        slope = np.zeros_like(r)
        slope[1:-1] = _minmod(r[1:-1] - r[:-2], r[2:] - r[1:-1])
        left = left + 0.5 * slope[:-1]
        right = right - 0.5 * slope[1:]
    flux = np.where(uf > 0, uf * left, uf * right)
    return np.moveaxis(flux, 0, axis)


def _advect(rho: np.ndarray, u: np.ndarray, p: ContinuityParams, domain) -> np.ndarray:
    out = rho.copy()
    for axis, h in ((0, domain.hx), (1, domain.hy)):
        flux = _face_flux(rho, u[axis], axis, p.limiter)
        # 每个控制体的净流出: 壁面通量为 0
        pad = [(0, 0), (0, 0)]
        pad[axis] = (1, 1)
        fl = np.pad(flux, pad)
        net = np.diff(fl, axis=axis)
        cell = np.full(domain.shape[axis], h)
        cell[[0, -1]] *= 0.5
        shape = [1, 1]
        shape[axis] = -1
        out -= p.dt * net / cell.reshape(shape)
    return out


def _clip_negative(rho: np.ndarray, domain) -> tuple[np.ndarray, int]:
    """负值截断为 0, 被截断的质量按比例从正值部分扣除。"""
    neg = rho < 0
    count = int(np.count_nonzero(neg))
    if count == 0:
        return rho, 0
    w = domain.weights
    mass = np.sum(w * rho)
    clipped = np.where(neg, 0.0, rho)
    positive = np.sum(w * clipped)
    if positive > 0:
        clipped *= mass / positive
    return clipped, count


def advance_density(rho: ScalarField, u: VectorField3, p: ContinuityParams) -> tuple[ScalarField, int]:
    """一步密度推进, 同时返回截断事件数。"""
    d = rho.domain
    if u.domain != d:
        raise ShapeError("密度与速度的网格不一致")
    if np.any(rho.values < 0):
        raise PreconditionError(f"输入密度存在负值: min rho = {rho.values.min():.3e}")
    check_cfl(u.values, p.dt, min(d.hx, d.hy), p.c_adv)

    values = rho.values
    clips = 0
    if np.any(u.values[:2]):
        values = _advect(values, u.values, p, d)
        values, clips = _clip_negative(values, d)
        if clips:
            logger.warning("密度对流出现 %d 个负值节点, 已截断并按比例重分配质量", clips)
    if p.eps > 0:
        values = spectral.diffuse_implicit(values, d, ("even", "even"), p.eps * p.dt)
    return ScalarField(d, values, "neumann0"), clips


def step_density(rho: ScalarField, u: VectorField3, p: ContinuityParams) -> ScalarField:
    """
    一步 IMEX 推进连续性方程。

    质量在梯形求积下守恒至舍入误差; eps = 0 且 u = 0 时逐位不变。
    """
    return advance_density(rho, u, p)[0]


def max_principle_envelope(rho0: ScalarField, divu_sup_history, dt: float):
    """
    极大值原理包络: lower_k = inf rho0 * exp(-sum_{i<=k} dt*||div u||_inf,i),
    upper_k = sup rho0 * exp(+...)。返回长度 len(history)+1 的两个数组。
    """
    if np.min(rho0.values) <= 0:
        raise PreconditionError("极大值原理包络要求 rho0 > 0")
    hist = np.asarray(list(divu_sup_history), dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(dt * hist)])
    return rho0.values.min() * np.exp(-cum), rho0.values.max() * np.exp(cum)


def density_row(t: float, rho: ScalarField, rho0: ScalarField, divu_history, dt: float,
                clips: int) -> dict:
    """诊断行: t, mass, min, max, 包络上下界, 截断数。"""
    lower = upper = float("nan")
    if rho0.values.min() > 0:
        lo, up = max_principle_envelope(rho0, divu_history, dt)
        lower, upper = float(lo[-1]), float(up[-1])
    return {
        "t": t,
        "mass": integrate_array(rho.values, rho.domain),
        "rho_min": float(rho.values.min()),
        "rho_max": float(rho.values.max()),
        "envelope_lower": lower,
        "envelope_upper": upper,
        "clip_count": clips,
    }
