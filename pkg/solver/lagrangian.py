# aurora/solver/lagrangian.py
"""
近似 Lagrange 坐标: u^N 的正向流 Phi, 标签场 Y, Jacobian J_y, 比容 v 以及 psi 的拉回。

同时维护两种视角:
  - Lagrange 节点上的正向数据 (Phi, a), a(t;x) = int_0^t div u^N(s, Phi(s;x)) ds
  - Euler 网格上的标签 Y 与累积量 A, A_t + u^N . grad A = div u^N
每步记录冻结的 u^N 采样器; Y 与 A 由网格节点沿记录的速度逐段 RK4 反向追踪到锚点时刻得到,
锚点为 t = 0 的恒等标签时不需要任何插值。relabel_every 步后以当前 (Y, A) 重新锚定。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple

import numpy as np

from solver.errors import GeometryError, ShapeError
from solver.fields import ComplexField, ScalarField, VectorField3, divergence, interp_array
from solver.geometry import Domain, SineBasis

logger = logging.getLogger(__name__)

# 位移 D = Y - x 在壁面上为 0 (u^N 满足无滑移条件)
DISPLACEMENT_BC = "dirichlet0"
ACCUMULATOR_BC = "neumann0"


class VelocitySampler(Protocol):
    def velocity(self, pts: np.ndarray) -> np.ndarray:
        """pts (..., 2) -> 平面速度 (..., 2)。"""

    def divergence(self, pts: np.ndarray) -> np.ndarray:
        """pts (..., 2) -> div u (...)。"""


class GalerkinVelocity:
    """由前 N 个模态系数给出的 u^N, 在任意点精确求正弦和。"""

    def __init__(self, basis: SineBasis, coeffs: np.ndarray):
        self.basis = basis
        # 采样器会被记入历史, 必须持有系数的副本
        self.coeffs = np.array(coeffs, dtype=float)

    def _eval(self, pts):
        return self.basis.evaluate_points(pts, len(self.coeffs))

    def velocity(self, pts):
        vals, _ = self._eval(pts)
        return np.stack([np.tensordot(self.coeffs[:, c], vals, axes=1) for c in (0, 1)], axis=-1)

    def divergence(self, pts):
        _, grads = self._eval(pts)
        return (np.tensordot(self.coeffs[:, 0], grads[:, 0], axes=1)
                + np.tensordot(self.coeffs[:, 1], grads[:, 1], axes=1))


class GridVelocity:
    """网格速度场的插值采样器。"""

    def __init__(self, u: VectorField3):
        self.u = u
        self.div = divergence(u)

    def velocity(self, pts):
        d = self.u.domain
        return np.stack([interp_array(self.u.values[c], d, self.u.bcs[c], pts) for c in (0, 1)],
                        axis=-1)

    def divergence(self, pts):
        return interp_array(self.div, self.u.domain, "none", pts)


@dataclass(frozen=True)
class FlowState:
    """
    Phi: (nx+2, ny+2, 2) 正向粒子位置; a: 沿轨迹累积的 div u^N;
    Y: (nx+2, ny+2, 2) Euler 标签场; A: Euler 累积量; t: 时间。
    anchor_Y, anchor_A: 最近一次重新锚定时的标签与累积量, None 表示 t = 0 的恒等标签;
    history: 锚定以来每步的 (采样器, dt)。
    """
    domain: Domain
    phi: np.ndarray
    a: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    t: float = 0.0
    anchor_Y: Optional[np.ndarray] = None
    anchor_A: Optional[np.ndarray] = None
    history: Tuple[tuple, ...] = ()

    @classmethod
    def identity(cls, domain: Domain, t: float = 0.0) -> "FlowState":
        pts = domain.points()
        zeros = np.zeros(domain.shape)
        return cls(domain, pts.copy(), zeros.copy(), pts.copy(), zeros.copy(), t)

    @property
    def jacobian(self) -> np.ndarray:
        """Euler 网格上的 J_y = exp(-A)。"""
        return np.exp(-self.A)

    def label_at(self, pts: np.ndarray) -> np.ndarray:
        """在任意点上求标签 Y(pts) = pts + D(pts)。"""
        D = self.Y - self.domain.points()
        return pts + np.stack([interp_array(D[..., c], self.domain, DISPLACEMENT_BC, pts)
                               for c in (0, 1)], axis=-1)


def _rk4(sampler: VelocitySampler, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = sampler.velocity(x)
    k2 = sampler.velocity(x + 0.5 * dt * k1)
    k3 = sampler.velocity(x + 0.5 * dt * k2)
    k4 = sampler.velocity(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_inside(pts: np.ndarray, domain: Domain, tol: Optional[float]) -> np.ndarray:
    if tol is None:
        return pts
    lo = np.minimum(pts[..., 0].min(), pts[..., 1].min())
    over_x = pts[..., 0].max() - domain.Lx
    over_y = pts[..., 1].max() - domain.Ly
    excess = max(-lo, over_x, over_y)
    if excess > tol:
        raise GeometryError(f"粒子轨迹离开区域 {excess:.3e} (容差 {tol:.1e})")
    out = pts.copy()
    out[..., 0] = np.clip(out[..., 0], 0.0, domain.Lx)
    out[..., 1] = np.clip(out[..., 1], 0.0, domain.Ly)
    return out


def trace_back(x: np.ndarray, history, domain: Domain,
               exit_tol: Optional[float] = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """
    沿记录的冻结速度逐段 RK4 反向追踪到锚点时刻。

    Returns:
        (pts, inc): 锚点时刻的位置, 以及沿途 div u 的梯形积分。
    """
    pts = x
    inc = np.zeros(x.shape[:-1])
    for sampler, dt in reversed(history):
        prev = _check_inside(_rk4(sampler, pts, -dt), domain, exit_tol)
        inc += 0.5 * dt * (sampler.divergence(pts) + sampler.divergence(prev))
        pts = prev
    return pts, inc


def step_flow(fs: FlowState, uN, dt: float, exit_tol: Optional[float] = 1e-8,
              relabel_every: Optional[int] = None) -> FlowState:
    """
    推进一个时间步。

    Args:
        fs (FlowState): 当前流状态。
        uN: VectorField3 (按网格插值) 或实现 velocity/divergence 的采样器。
        dt (float): 时间步长。
        exit_tol (float): 轨迹离开区域的容差, None 表示不检查。
        relabel_every (int): 累积多少步后以当前 (Y, A) 重新锚定, None 或 0 表示始终追踪到 t = 0。

    Returns:
        FlowState: 新的流状态。
    """
    sampler = GridVelocity(uN) if isinstance(uN, VectorField3) else uN
    d = fs.domain
    if fs.phi.shape != d.shape + (2,):
        raise ShapeError("FlowState 的形状与网格不一致")

    # 正向: RK4 推进 Phi, 梯形公式累积 a
    phi = _check_inside(_rk4(sampler, fs.phi, dt), d, exit_tol)
    a = fs.a + 0.5 * dt * (sampler.divergence(fs.phi) + sampler.divergence(phi))

    # 反向: 网格节点追踪回锚点时刻
    history = fs.history + ((sampler, dt),)
    x = d.points()
    pts, inc = trace_back(x, history, d, exit_tol)
    if fs.anchor_Y is None:
        Y, A = pts, inc
    else:
        D = fs.anchor_Y - x
        Y = pts + np.stack([interp_array(D[..., c], d, DISPLACEMENT_BC, pts) for c in (0, 1)],
                           axis=-1)
        A = interp_array(fs.anchor_A, d, ACCUMULATOR_BC, pts) + inc

    anchor_Y, anchor_A = fs.anchor_Y, fs.anchor_A
    if relabel_every and len(history) >= relabel_every:
        logger.debug("t=%.4g 处重新锚定标签场 (%d 步)", fs.t + dt, len(history))
        anchor_Y, anchor_A, history = Y, A, ()
    return FlowState(d, phi, a, Y, A, fs.t + dt, anchor_Y, anchor_A, history)


def _diff4(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """四阶差分: 内部中心五点, 两端各两个节点用单侧五点。"""
    f = np.moveaxis(values, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def jacobian_fd_determinant(fs: FlowState) -> np.ndarray:
    """标签场的有限差分 Jacobian 行列式 det(dY/dx)。"""
    d = fs.domain
    D = fs.Y - d.points()
    d1x, d1y = _diff4(D[..., 0], 0, d.hx), _diff4(D[..., 0], 1, d.hy)
    d2x, d2y = _diff4(D[..., 1], 0, d.hx), _diff4(D[..., 1], 1, d.hy)
    return (1.0 + d1x) * (1.0 + d2y) - d1y * d2x


def jacobian_bound_check(fs: FlowState, C_N: float, u_h1_history) -> tuple[bool, float]:
    """
    检查 exp(-C_N(t + int||u||^2_{H1})) <= min J_y <= max J_y <= exp(+C_N(...))。

    u_h1_history 为逐步增量 int_{t_k}^{t_k+1} ||grad u||^2 ds 的序列。
    margin 为 log J 到最近边界的距离, 负值表示违反。
    """
    bound = C_N * (fs.t + float(np.sum(u_h1_history)))
    logJ = -fs.A
    margin = float(min(logJ.min() + bound, bound - logJ.max()))
    return margin >= 0.0, margin


def specific_volume(rho: ScalarField, fs: FlowState, rho_floor: float = 1e-8) -> ScalarField:
    """v(t, w) = 1/rho(t, Phi(t; w)), rho <= rho_floor 处截断为 1/rho_floor。"""
    d = fs.domain
    vals = interp_array(rho.values, d, rho.bc, fs.phi)
    return ScalarField(d, 1.0 / np.maximum(vals, rho_floor), "none")


def pullback_wave_sq(psi: ComplexField, fs: FlowState) -> ScalarField:
    """|psi(t, Y(t,x))|^2, 在标签位置插值 psi。"""
    d = fs.domain
    if not np.any(psi.values):
        return ScalarField(d, np.zeros(d.shape), "none")
    pts = fs.Y.copy()
    pts[..., 0] = np.clip(pts[..., 0], 0.0, d.Lx)
    pts[..., 1] = np.clip(pts[..., 1], 0.0, d.Ly)
    re = interp_array(psi.values.real, d, "dirichlet0", pts)
    im = interp_array(psi.values.imag, d, "dirichlet0", pts)
    return ScalarField(d, re ** 2 + im ** 2, "none")
