# aurora/solver/galerkin.py
"""
Faedo-Galerkin 动量更新与整个耦合系统的推进。

动量以积分形式 b(t) = m0* + int_0^t N[u] ds 为主表示, 系数 u = M[rho]^{-1} b。
M_ij = int rho eta_i eta_j 由三个速度分量共享。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import linalg

from solver.continuity import ContinuityParams, advance_density, density_row
from solver.coupling import InteractionSpec, force_potential, potential_G
from solver.errors import HorizonError, ParameterError, ShapeError, SingularMassError
from solver.fields import (BC_PARITY, ComplexField, ScalarField, VectorField3, curl, diff,
                           divergence, gradient_array, integrate_array)
from solver.geometry import GalerkinState, SineBasis, synthesize, synthesize_gradient
from solver.induction import InductionParams, cross, magnetic_row, step_magnetic
from solver.lagrangian import (FlowState, GalerkinVelocity, pullback_wave_sq, specific_volume,
                               step_flow)
from solver.nls import WaveParams, step_wave, wave_row

logger = logging.getLogger(__name__)


def admissible_beta(r: float) -> float:
    """beta 的下界 max{2r/(2-r), 2r/(r-1)}, r in (1, 2)。"""
    if not (1.0 < r < 2.0):
        raise ParameterError(f"指数 r 必须位于 (1, 2) 内, 得到 r={r}")
    return max(2 * r / (2 - r), 2 * r / (r - 1))


@dataclass(frozen=True)
class PhysParams:
    """
    物理参数: 压力律 a rho^gamma, 人工压力 delta rho^beta, 粘性 lam/mu,
    磁扩散 nu, 人工粘性 eps, 相互作用系数 alpha, 以及估计中使用的指数 r。
    """
    a: float = 0.1
    gamma: float = 1.4
    delta: float = 1e-3
    beta: float = 8.0
    lam: float = 0.0
    mu: float = 1.0
    nu: float = 0.1
    eps: float = 1e-2
    alpha: float = 1e-12
    r: float = 1.5

    def __post_init__(self):
        errors = []
        if self.a < 0:
            errors.append(f"a={self.a} 必须 >= 0")
        if self.gamma <= 1:
            errors.append(f"gamma={self.gamma} 必须 > 1")
        if self.delta < 0:
            errors.append(f"delta={self.delta} 必须 >= 0")
        if self.beta <= 1:
            errors.append(f"beta={self.beta} 必须 > 1")
        if self.mu <= 0:
            errors.append(f"mu={self.mu} 必须 > 0")
        if 2 * self.mu + self.lam <= 0:
            errors.append(f"2mu+lam={2 * self.mu + self.lam} 必须 > 0")
        if self.nu <= 0:
            errors.append(f"nu={self.nu} 必须 > 0")
        if self.eps < 0:
            errors.append(f"eps={self.eps} 必须 >= 0")
        if self.alpha < 0:
            errors.append(f"alpha={self.alpha} 必须 >= 0")
        if self.delta > 0 and self.beta <= admissible_beta(self.r):
            errors.append(f"beta={self.beta} 必须 > {admissible_beta(self.r):.4g} (r={self.r})")
        if errors:
            raise ParameterError("物理参数不合法: " + "; ".join(errors))

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        r = np.maximum(rho, 0.0)
        return self.a * r ** self.gamma + self.delta * r ** self.beta


@dataclass(frozen=True)
class StepSettings:
    """coupled_step 的数值设置。"""
    N: int = 1
    c_adv: float = 0.25
    limiter: str = "upwind"
    exit_tol: Optional[float] = 1e-8
    rho_floor: float = 1e-8
    wave_substeps: int = 1
    horizon: Optional[float] = None
    relabel_every: int = 0


@dataclass(frozen=True)
class SystemState:
    """
    (rho, u, H, psi) 与流状态; 速度网格场由 Galerkin 系数合成。
    累积量 dissipation / density_dissipation / u_h1_integral 供能量账本与 Jacobian 界使用。
    """
    rho: ScalarField
    galerkin: GalerkinState
    H: VectorField3
    psi: ComplexField
    flow: FlowState
    basis: SineBasis
    rho0: ScalarField
    t: float = 0.0
    dissipation: float = 0.0
    density_dissipation: float = 0.0
    u_h1_integral: float = 0.0
    u_h1_history: tuple = ()
    divu_sup_history: tuple = ()
    last_rows: dict = field(default_factory=dict)

    @property
    def domain(self):
        return self.rho.domain

    @property
    def n(self) -> int:
        return self.galerkin.n

    @cached_property
    def u(self) -> VectorField3:
        return VectorField3(self.domain, synthesize(self.basis, self.galerkin.coeffs))

    @cached_property
    def grad_u(self) -> np.ndarray:
        return synthesize_gradient(self.basis, self.galerkin.coeffs)


# ---------------------------------------------------------------------------
# 质量算子
# ---------------------------------------------------------------------------

def assemble_mass(rho: ScalarField, basis: SineBasis, n: int) -> np.ndarray:
    """M_ij = int rho eta_i eta_j, 对称正定; inf rho <= 0 时报错。"""
    if rho.domain != basis.domain:
        raise ShapeError("密度与正弦基的网格不一致")
    rmin = float(rho.values.min())
    if rmin <= 0:
        raise SingularMassError(f"质量矩阵奇异: inf rho = {rmin:.3e} <= 0")
    eta = basis.values[:n]
    wr = basis.domain.weights * rho.values
    M = np.einsum("ixy,jxy->ij", eta * wr, eta)
    return 0.5 * (M + M.T)


def _solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = linalg.cho_factor(M)
    except linalg.LinAlgError as e:
        raise SingularMassError(f"质量矩阵 Cholesky 分解失败: {e}") from e
    return linalg.cho_solve(factor, rhs)


def mass_lipschitz_factors(rho1: ScalarField, rho2: ScalarField, basis: SineBasis, n: int) -> dict:
    """
    ||M1^{-1} - M2^{-1}|| <= ||M2^{-1}|| ||M2 - M1|| ||M1^{-1}|| 的各因子,
    以及逐元素界 max|dM_ij| <= max_ij ||eta_i eta_j||_inf ||rho1 - rho2||_{L1}。
    """
    M1, M2 = assemble_mass(rho1, basis, n), assemble_mass(rho2, basis, n)
    inv1, inv2 = np.linalg.inv(M1), np.linalg.inv(M2)
    dM = M2 - M1
    eta = basis.values[:n]
    prod_sup = float(np.max(np.abs(eta[:, None] * eta[None, :])))
    return {
        "inv_diff": float(np.linalg.norm(inv1 - inv2, 2)),
        "inv1": float(np.linalg.norm(inv1, 2)),
        "inv2": float(np.linalg.norm(inv2, 2)),
        "dM_norm": float(np.linalg.norm(dM, 2)),
        "dM_max": float(np.max(np.abs(dM))),
        "eta_prod_sup": prod_sup,
        "rho_l1": integrate_array(np.abs(rho1.values - rho2.values), basis.domain),
    }


# ---------------------------------------------------------------------------
# 非线性算子 N
# ---------------------------------------------------------------------------

def _force_for(rho: ScalarField, J: np.ndarray, wsq: np.ndarray, spec: InteractionSpec):
    return force_potential(spec, rho, J, wsq).values


def _rhs(coeffs: np.ndarray, rho: ScalarField, H: VectorField3, f: Optional[np.ndarray],
         params: PhysParams, basis: SineBasis) -> np.ndarray:
    """<N[u], eta_j>, 返回 (n, 3)。f 为 None 时外力项在结构上被跳过。"""
    d = basis.domain
    w = d.weights
    n = len(coeffs)
    eta = basis.values[:n]
    geta = basis.gradients[:n]
    u = synthesize(basis, coeffs)
    gu = synthesize_gradient(basis, coeffs)
    r = rho.values

    out = np.zeros((n, 3))
    # 对流 int rho u_c u_k d_k eta_j
    flux = r * u[:, None] * u[None, :2]
    out += np.einsum("ckxy,jkxy->jc", flux * w, geta)

    # 压力与外力势, 只作用于平面分量
    scal = params.pressure(r)
    if f is not None:
        scal = scal - f
    out[:, :2] += np.einsum("xy,jkxy->jk", scal * w, geta)

    if params.eps > 0:
        grho = np.stack(gradient_array(r, d, rho.bc))
        cross_term = np.einsum("ckxy,kxy->cxy", gu, grho)
        out -= params.eps * np.einsum("cxy,jxy->jc", cross_term * w, eta)

    if np.any(H.values):
        lorentz = cross(curl(H), H.values)
        out += np.einsum("cxy,jxy->jc", lorentz * w, eta)

    out -= params.mu * np.einsum("ckxy,jkxy->jc", gu * w, geta)
    div = gu[0, 0] + gu[1, 1]
    out[:, :2] -= (params.lam + params.mu) * np.einsum("xy,jkxy->jk", div * w, geta)
    return out


def assemble_rhs(state: SystemState, params: PhysParams, spec: InteractionSpec) -> np.ndarray:
    """
    <N[u], eta_j> (n x 3)。alpha = 0 时不读取 psi 与 FlowState。
    """
    f = None
    if spec.alpha > 0:
        wsq = pullback_wave_sq(state.psi, state.flow).values
        f = _force_for(state.rho, state.flow.jacobian, wsq, spec)
    return _rhs(state.galerkin.coeffs, state.rho, state.H, f, params, state.basis)


def momentum_step(state: SystemState, params: PhysParams, spec: InteractionSpec, dt: float,
                  rho_next: Optional[ScalarField] = None) -> GalerkinState:
    """
    b <- b + dt <N[u_mid], eta> (RK2 中点), 然后 coeffs = M[rho(t+dt)]^{-1} b。

    rho_next 缺省时视密度在本步内冻结。H, psi 与流状态在本步内冻结。
    """
    basis, n = state.basis, state.n
    rho_t = state.rho
    rho_next = rho_t if rho_next is None else rho_next
    rho_mid = ScalarField(rho_t.domain, 0.5 * (rho_t.values + rho_next.values), rho_t.bc)

    b = state.galerkin.b
    if b is None:
        b = assemble_mass(rho_t, basis, n) @ state.galerkin.coeffs

    J = wsq = None
    if spec.alpha > 0:
        J = state.flow.jacobian
        wsq = pullback_wave_sq(state.psi, state.flow).values

    def force(rho):
        return None if J is None else _force_for(rho, J, wsq, spec)

    k1 = _rhs(state.galerkin.coeffs, rho_t, state.H, force(rho_t), params, basis)
    c_mid = _solve(assemble_mass(rho_mid, basis, n), b + 0.5 * dt * k1)
    k2 = _rhs(c_mid, rho_mid, state.H, force(rho_mid), params, basis)
    b_new = b + dt * k2
    coeffs = _solve(assemble_mass(rho_next, basis, n), b_new)
    return GalerkinState(n=n, coeffs=coeffs, t=state.galerkin.t + dt, b=b_new)


def initial_velocity(m0: VectorField3, rho0: ScalarField, basis: SineBasis, n: int) -> GalerkinState:
    """解 M[rho0] c = <m0, eta>; b 初值即 m0*。"""
    w = basis.domain.weights
    rhs = np.einsum("cxy,jxy->jc", m0.values * w, basis.values[:n])
    coeffs = _solve(assemble_mass(rho0, basis, n), rhs)
    return GalerkinState(n=n, coeffs=coeffs, t=0.0, b=rhs)


# ---------------------------------------------------------------------------
# 耦合推进
# ---------------------------------------------------------------------------

def initial_state(rho0: ScalarField, m0: VectorField3, H0: VectorField3, psi0: ComplexField,
                  basis: SineBasis, n: int) -> SystemState:
    gs = initial_velocity(m0, rho0, basis, n)
    return SystemState(rho=rho0, galerkin=gs, H=H0, psi=psi0,
                       flow=FlowState.identity(rho0.domain), basis=basis, rho0=rho0)


def dissipation_rates(state: SystemState, params: PhysParams, rho_floor: float = 1e-8) -> dict:
    """能量耗散率: 粘性+磁扩散, 以及密度耗散 eps int (a gamma rho^{gamma-2} + ...)|grad rho|^2。"""
    d = state.domain
    gu = state.grad_u
    grad_sq = np.sum(gu ** 2, axis=(0, 1))
    div = gu[0, 0] + gu[1, 1]
    gH = 0.0
    for i, bc in enumerate(state.H.bcs):
        px, py = BC_PARITY[bc]
        gH = gH + diff(state.H.values[i], 0, d.hx, px) ** 2 + diff(state.H.values[i], 1, d.hy, py) ** 2
    viscous = integrate_array(params.mu * grad_sq + (params.lam + params.mu) * div ** 2
                              + params.nu * gH, d)

    r = np.maximum(state.rho.values, rho_floor)
    gx, gy = gradient_array(state.rho.values, d, state.rho.bc)
    weight = params.a * params.gamma * r ** (params.gamma - 2) + params.delta * params.beta * r ** (params.beta - 2)
    density = params.eps * integrate_array(weight * (gx ** 2 + gy ** 2), d)
    return {"viscous": viscous, "density": density, "u_h1": integrate_array(grad_sq, d)}


def coupled_step(state: SystemState, params: PhysParams, spec: InteractionSpec, dt: float,
                 settings: Optional[StepSettings] = None) -> SystemState:
    """
    按 Lie 顺序推进整个系统一步:
    (1) u^N = P_N u; (2) 流与标签; (3) 密度; (4) 磁场; (5) v, |psi o Y|^2, J_y;
    (6) 冻结 G 的 NLS 子步; (7) 动量。任何子求解器出错时输入状态保持不变。
    """
    settings = settings or StepSettings()
    if settings.horizon is not None and state.t + dt > settings.horizon * (1 + 1e-12):
        raise HorizonError(f"t + dt = {state.t + dt:.6g} 超过 T^N = {settings.horizon:.6g}")

    basis = state.basis
    N = min(settings.N, state.n)
    u = state.u

    # (1)-(2)
    uN = GalerkinVelocity(basis, state.galerkin.truncated(N))
    flow = step_flow(state.flow, uN, dt, exit_tol=settings.exit_tol,
                     relabel_every=settings.relabel_every)

    # (3)
    cp = ContinuityParams(eps=params.eps, dt=dt, c_adv=settings.c_adv, limiter=settings.limiter)
    rho_next, clips = advance_density(state.rho, u, cp)

    # (4)
    H_next = step_magnetic(state.H, u, InductionParams(nu=params.nu, dt=dt, c_adv=settings.c_adv))

    # (5)-(6)
    v = specific_volume(rho_next, flow, settings.rho_floor)
    G = potential_G(spec, v, state.psi) if spec.alpha > 0 else None
    wave = WaveParams(dt=dt / settings.wave_substeps, substeps=settings.wave_substeps)
    psi_next = step_wave(state.psi, G, wave)

    # (7)
    frozen = replace(state, H=H_next, psi=psi_next, flow=flow)
    gs = momentum_step(frozen, params, spec, dt, rho_next=rho_next)

    t = state.t + dt
    divu_hist = state.divu_sup_history + (float(np.max(np.abs(divergence(u)))),)
    new = replace(state, rho=rho_next, galerkin=gs, H=H_next, psi=psi_next, flow=flow, t=t,
                  divu_sup_history=divu_hist, last_rows={})
    rates = dissipation_rates(new, params, settings.rho_floor)
    h1_hist = state.u_h1_history + (dt * rates["u_h1"],)
    new = replace(new,
                  dissipation=state.dissipation + dt * rates["viscous"],
                  density_dissipation=state.density_dissipation + dt * rates["density"],
                  u_h1_integral=state.u_h1_integral + dt * rates["u_h1"],
                  u_h1_history=h1_hist,
                  last_rows={
                      "continuity": density_row(t, rho_next, state.rho0, divu_hist, dt, clips),
                      "induction": magnetic_row(t, H_next, params.nu, dt),
                      "nls": wave_row(t, psi_next, spec, v),
                  })
    logger.debug("t=%.5g: mass=%.12g, |c|=%.4g", t, new.last_rows["continuity"]["mass"],
                 gs.l2_norm)
    return new
