# aurora/solver/diagnostics.py
"""
诊断量: 能量账本、能量不等式残差、常数 R 与时间视界 T^N、Riesz 算子 A_j、
磨光算子、有效粘性通量探针以及重整化连续性方程残差。

全部函数对输入快照是纯函数, 可以在进程间自由并行。
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft, integrate, signal

from solver.coupling import InteractionSpec
from solver.errors import NumericalError, ParameterError, PreconditionError, ResolutionError, ShapeError
from solver.fields import (BC_PARITY, ScalarField, VectorField3, diff, divergence, integrate_array)
from solver.geometry import Domain
from solver.lagrangian import specific_volume
from solver.nls import wave_energy_terms

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = ["t", "kinetic", "pressure", "artificial", "magnetic", "wave_kinetic",
                  "wave_quartic", "coupling", "dissipation", "density_dissipation", "E"]
CUMULATIVE_COLUMNS = ("dissipation", "density_dissipation")


# ---------------------------------------------------------------------------
# 能量账本
# ---------------------------------------------------------------------------

def energy(state, params, spec: InteractionSpec, rho_floor: float = 1e-8) -> dict:
    """
    计算当前状态的能量行。

    E = 动能 + 压力能 + 人工压力能 + 磁能 + 波能量 + 耦合能 + 累积耗散;
    波能量各项在 Lagrange 网格上按测度 dy 计算。

    Args:
        state (SystemState): 系统状态。
        params (PhysParams): 物理参数。
        spec (InteractionSpec): 相互作用函数。
        rho_floor (float): 比容计算中的密度下限。

    Returns:
        dict: 键为 LEDGER_COLUMNS。
    """
    d = state.domain
    r = np.maximum(state.rho.values, 0.0)
    u = state.u.values
    row = {
        "t": float(state.t),
        "kinetic": 0.5 * integrate_array(r * np.sum(u ** 2, axis=0), d),
        "pressure": params.a / (params.gamma - 1) * integrate_array(r ** params.gamma, d),
        "artificial": params.delta / (params.beta - 1) * integrate_array(r ** params.beta, d),
        "magnetic": 0.5 * integrate_array(np.sum(state.H.values ** 2, axis=0), d),
    }
    v = specific_volume(state.rho, state.flow, rho_floor) if spec.alpha > 0 else None
    wave = wave_energy_terms(state.psi, spec, v)
    row["wave_kinetic"] = wave["wave_kinetic"]
    row["wave_quartic"] = wave["wave_quartic"]
    row["coupling"] = wave["wave_coupling"]
    row["dissipation"] = float(state.dissipation)
    row["density_dissipation"] = float(state.density_dissipation)
    row["E"] = sum(row[k] for k in LEDGER_COLUMNS[1:-2])
    return row


@dataclass
class EnergyLedger:
    """按时间顺序排列的能量行。"""
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        self.rows.append({k: float(row[k]) for k in LEDGER_COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    @property
    def E0(self) -> float:
        if not self.rows:
            raise PreconditionError("能量账本为空")
        return self.rows[0]["E"]

    def validate(self) -> None:
        """所有条目有限, 累积列单调不减。"""
        for name in LEDGER_COLUMNS:
            if not np.all(np.isfinite(self.column(name))):
                raise NumericalError(f"能量账本列 {name} 含非有限值")
        for name in CUMULATIVE_COLUMNS:
            if np.any(np.diff(self.column(name)) < 0):
                raise NumericalError(f"累积列 {name} 出现下降")

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=LEDGER_COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: repr(v) for k, v in row.items()})

    @classmethod
    def from_csv(cls, path: str) -> "EnergyLedger":
        ledger = cls()
        with open(path, "r", newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                ledger.append({k: float(row[k]) for k in LEDGER_COLUMNS})
        return ledger


def energy_residual(ledger: EnergyLedger, eps: float, R: float) -> np.ndarray:
    """
    r(t) = [E(t) + 密度耗散(t)] - [E(0) + eps^{1/2} R]。

    density_dissipation 列已经包含因子 eps。
    """
    if len(ledger) == 0:
        raise PreconditionError("能量账本为空")
    E = ledger.column("E") + ledger.column("density_dissipation")
    return E - (ledger.E0 + math.sqrt(eps) * R)


# ---------------------------------------------------------------------------
# 常数 R 与视界 T^N
# ---------------------------------------------------------------------------

def _second_diff(values: np.ndarray, axis: int, h: float, parity: Optional[str]) -> np.ndarray:
    if parity is None:
        return np.gradient(np.gradient(values, h, axis=axis, edge_order=2), h, axis=axis,
                           edge_order=2)
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 1)
    ext = np.pad(values, pad, mode="reflect", reflect_type=parity)
    lo, mid, hi = ([slice(None)] * values.ndim for _ in range(3))
    lo[axis], mid[axis], hi[axis] = slice(None, -2), slice(1, -1), slice(2, None)
    return (ext[tuple(hi)] - 2.0 * ext[tuple(mid)] + ext[tuple(lo)]) / h ** 2


def sobolev_norm(f: ScalarField, order: int, p: float) -> float:
    """
    离散 W^{order,p} 范数 (order <= 2), 导数用中心差分, 积分用梯形公式。

    二阶部分对全部有序指标 (i, j) 求和, 混合导数 d_xy 计两次。
    """
    if order not in (0, 1, 2):
        raise ParameterError(f"只支持 0-2 阶 Sobolev 范数, 得到 {order}")
    d = f.domain
    px, py = BC_PARITY[f.bc]
    parts = [(1.0, f.values)]
    if order >= 1:
        gx = diff(f.values, 0, d.hx, px)
        parts += [(1.0, gx), (1.0, diff(f.values, 1, d.hy, py))]
    if order >= 2:
        parts += [(1.0, _second_diff(f.values, 0, d.hx, px)),
                  (2.0, diff(gx, 1, d.hy, py)),
                  (1.0, _second_diff(f.values, 1, d.hy, py))]
    total = sum(weight * integrate_array(np.abs(part) ** p, d) for weight, part in parts)
    return total ** (1.0 / p)


def bound_R(rho0: ScalarField, E0: float, eps: float, r: float) -> float:
    """R = eps ||rho0||_{W^{2,r}} + ||rho0||_{H^1}^2 + E(0) + 1。"""
    if not (1.0 < r < 2.0):
        raise ParameterError(f"指数 r 必须位于 (1, 2) 内, 得到 r={r}")
    w2r = sobolev_norm(rho0, 2, r) if eps > 0 else 0.0
    return eps * w2r + sobolev_norm(rho0, 1, 2.0) ** 2 + E0 + 1.0


@dataclass(frozen=True)
class HorizonInputs:
    C_N: float
    eps: float
    alpha: float
    mu: float
    E0: float
    R: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ParameterError(f"视界要求 alpha > 0, 得到 alpha={self.alpha}")
        if self.eps <= 0:
            raise ParameterError(f"视界要求 eps > 0, 得到 eps={self.eps}")
        if self.mu <= 0 or self.C_N <= 0:
            raise ParameterError(f"视界要求 mu > 0 且 C_N > 0, 得到 mu={self.mu}, C_N={self.C_N}")


def horizon_TN(h: HorizonInputs) -> float:
    """T^N = (1/C_N) log(eps^2/alpha) - (E0 + eps^{1/2} R)/mu, 可能为负。"""
    return (math.log(h.eps ** 2 / h.alpha) / h.C_N
            - (h.E0 + math.sqrt(h.eps) * h.R) / h.mu)


# ---------------------------------------------------------------------------
# Riesz 算子与磨光
# ---------------------------------------------------------------------------

def _padded_frequencies(domain: Domain, pad: int):
    mx, my = pad * (domain.nx + 1), pad * (domain.ny + 1)
    xi_x = 2 * np.pi * fft.fftfreq(mx, d=domain.hx)
    xi_y = 2 * np.pi * fft.fftfreq(my, d=domain.hy)
    return np.meshgrid(xi_x, xi_y, indexing="ij")


def fourier_multiplier(values: np.ndarray, domain: Domain,
                       symbol: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       pad: int = 4, crop: bool = True) -> np.ndarray:
    """
    在 pad 倍零延拓的周期盒上作用 Fourier 乘子 symbol(xi_x, xi_y)。

    crop=False 时返回整个周期盒上的结果, 便于复合多个乘子。
    """
    if pad < 2:
        raise ParameterError(f"零延拓倍数必须 >= 2, 得到 {pad}")
    xi_x, xi_y = _padded_frequencies(domain, pad)
    box = np.zeros(xi_x.shape, dtype=complex)
    box[:values.shape[0], :values.shape[1]] = values
    out = fft.ifft2(fft.fft2(box) * symbol(xi_x, xi_y))
    if crop:
        out = out[:domain.nx + 2, :domain.ny + 2]
    return out


def _riesz_symbol(j: int):
    def symbol(xi_x, xi_y):
        xi = (xi_x, xi_y)[j]
        mag = xi_x ** 2 + xi_y ** 2
        out = np.zeros_like(mag, dtype=complex)
        nz = mag > 0
        out[nz] = -1j * xi[nz] / mag[nz]
        return out
    return symbol


def riesz_A(f: ScalarField, j: int, pad: int = 4) -> ScalarField:
    """A_j f, 符号 -i xi_j / |xi|^2, f 在区域外延拓为 0, 零模态置 0。"""
    if j not in (0, 1):
        raise ParameterError(f"方向 j 必须为 0 或 1, 得到 {j}")
    out = fourier_multiplier(f.values, f.domain, _riesz_symbol(j), pad)
    return ScalarField(f.domain, out.real, "none")


def riesz_divergence(f: ScalarField, pad: int = 4) -> ScalarField:
    """sum_j d_j A_j f, 在同一周期盒上做谱导数; 结果等于 f 减去其在周期盒上的均值。"""
    def symbol(xi_x, xi_y):
        return sum(1j * xi * _riesz_symbol(j)(xi_x, xi_y) for j, xi in enumerate((xi_x, xi_y)))
    out = fourier_multiplier(f.values, f.domain, symbol, pad)
    return ScalarField(f.domain, out.real, "none")


def riesz_norm_ratio(f: ScalarField, j: int, pad: int = 4) -> float:
    """||A_j f||_{W^{1,2}(Omega)} / ||f||_{L^2}, 导数用二阶单侧闭合差分。"""
    Af = riesz_A(f, j, pad)
    norm_f = math.sqrt(integrate_array(f.values ** 2, f.domain))
    if norm_f == 0:
        return 0.0
    return sobolev_norm(Af, 1, 2.0) / norm_f


def _bump(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _bump_derivative(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si ** 2)) * (-2.0 * si / (1.0 - si ** 2) ** 2)
    return out


def mollifier_kernel(domain: Domain, omega: float) -> np.ndarray:
    """径向 C^inf 鼓包 exp(-1/(1-r^2)) 的网格采样, 离散和为 1。"""
    mx = int(math.ceil(omega / domain.hx))
    my = int(math.ceil(omega / domain.hy))
    ox = np.arange(-mx, mx + 1) * domain.hx
    oy = np.arange(-my, my + 1) * domain.hy
    rr = np.sqrt(ox[:, None] ** 2 + oy[None, :] ** 2) / omega
    K = _bump(rr)
    return K / K.sum()


def mollify(f: ScalarField, omega: float) -> ScalarField:
    """
    [f]^omega = theta_omega * f, 边界外按边界标签做奇/偶延拓。

    Args:
        f (ScalarField): 被磨光的场。
        omega (float): 磨光半径, 必须大于 2h。

    Returns:
        ScalarField: 与 f 边界标签相同的磨光场。
    """
    d = f.domain
    if omega <= 2 * d.h:
        raise ResolutionError(f"磨光半径 omega={omega:.3e} 必须大于 2h={2 * d.h:.3e}")
    K = mollifier_kernel(d, omega)
    mx, my = K.shape[0] // 2, K.shape[1] // 2
    px, py = BC_PARITY[f.bc]
    ext = np.pad(f.values, [(mx, 0), (0, 0)], mode="reflect", reflect_type=px or "even")
    ext = np.pad(ext, [(0, mx), (0, 0)], mode="reflect", reflect_type=px or "even")
    ext = np.pad(ext, [(0, 0), (my, my)], mode="reflect", reflect_type=py or "even")
    out = signal.fftconvolve(ext, K, mode="valid")
    return ScalarField(d, out, f.bc)


# ---------------------------------------------------------------------------
# 快照上的探针
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSnapshots:
    """一次运行的快照序列: times (K,), rho (K, X, Y), u (K, 3, X, Y)。"""
    domain: Domain
    times: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    psi: Optional[np.ndarray] = None

    def __post_init__(self):
        K = len(self.times)
        if self.rho.shape != (K,) + self.domain.shape:
            raise ShapeError(f"密度快照形状 {self.rho.shape} 与时间数 {K} 或网格不一致")
        if self.u.shape != (K, 3) + self.domain.shape:
            raise ShapeError(f"速度快照形状 {self.u.shape} 与时间数 {K} 或网格不一致")
        if K > 1 and np.any(np.diff(self.times) <= 0):
            raise ShapeError("快照时间必须严格递增")

    def __len__(self) -> int:
        return len(self.times)

    def div_u(self) -> np.ndarray:
        return np.stack([divergence(VectorField3(self.domain, uk)) for uk in self.u])


@dataclass(frozen=True)
class TimeWindow:
    """时间截断 zeta(t), 支撑在 (t0, t1) 内的光滑鼓包。"""
    t0: float
    t1: float

    def _s(self, t):
        return (2.0 * np.asarray(t, dtype=float) - self.t0 - self.t1) / (self.t1 - self.t0)

    def __call__(self, t):
        return _bump(self._s(t))

    def derivative(self, t):
        return _bump_derivative(self._s(t)) * 2.0 / (self.t1 - self.t0)


@dataclass(frozen=True)
class SpaceWindow:
    """空间截断 eta(x), 以 center 为心、半径 radius 的径向鼓包。"""
    center: tuple[float, float]
    radius: float

    def _r(self, domain: Domain):
        X, Y = domain.mesh()
        dx, dy = X - self.center[0], Y - self.center[1]
        return dx, dy, np.sqrt(dx ** 2 + dy ** 2)

    def values(self, domain: Domain) -> np.ndarray:
        return _bump(self._r(domain)[2] / self.radius)

    def gradient(self, domain: Domain) -> np.ndarray:
        dx, dy, rr = self._r(domain)
        db = _bump_derivative(rr / self.radius) / self.radius
        safe = np.where(rr > 0, rr, 1.0)
        return np.stack([db * dx / safe, db * dy / safe])


def time_window(t0: float, t1: float) -> TimeWindow:
    if t1 <= t0:
        raise ParameterError(f"时间窗要求 t0 < t1, 得到 [{t0}, {t1}]")
    return TimeWindow(t0, t1)


def space_window(center, radius: float) -> SpaceWindow:
    if radius <= 0:
        raise ParameterError(f"空间窗半径必须为正, 得到 {radius}")
    return SpaceWindow((float(center[0]), float(center[1])), float(radius))


def _time_integral(values: np.ndarray, times: np.ndarray) -> float:
    if len(times) == 1:
        return 0.0
    return float(integrate.trapezoid(values, times))


def viscous_flux_probe(snaps: RunSnapshots, params, zeta: TimeWindow, eta: SpaceWindow) -> float:
    """int int zeta eta (a rho^gamma + delta rho^beta - (lam + 2mu) div u) rho dx dt。"""
    d = snaps.domain
    w = eta.values(d)
    div = snaps.div_u()
    per_t = np.empty(len(snaps))
    for k in range(len(snaps)):
        r = np.maximum(snaps.rho[k], 0.0)
        flux = params.pressure(r) - (params.lam + 2 * params.mu) * div[k]
        per_t[k] = integrate_array(w * flux * r, d)
    return _time_integral(zeta(snaps.times) * per_t, snaps.times)


def _entropy_density(rho: np.ndarray) -> np.ndarray:
    return np.where(rho > 0, rho * np.log(np.where(rho > 0, rho, 1.0)), 0.0)


def renorm_residual(snaps: RunSnapshots, tests: Sequence[tuple[TimeWindow, SpaceWindow]]) -> float:
    """
    (rho log rho)_t + div(rho log rho u) + rho div u 对测试函数 zeta(t) eta(x) 的积分,
    返回各测试函数上绝对值的最大值。时间导数用二阶差分, 空间导数用中心差分。
    """
    d = snaps.domain
    if len(snaps) < 3:
        raise PreconditionError("重整化残差至少需要 3 个快照")
    if not tests:
        return 0.0
    for _, eta in tests:
        supp = eta.values(d) > 0
        if np.any(snaps.rho[:, supp] <= 0):
            raise PreconditionError("测试函数支撑上存在非正密度, 无法取对数")

    B = _entropy_density(snaps.rho)
    dBdt = np.gradient(B, snaps.times, axis=0, edge_order=2)
    flux_div = np.stack([diff(B[k] * snaps.u[k, 0], 0, d.hx, None)
                         + diff(B[k] * snaps.u[k, 1], 1, d.hy, None) for k in range(len(snaps))])
    R = dBdt + flux_div + snaps.rho * snaps.div_u()

    worst = 0.0
    for zeta, eta in tests:
        w = eta.values(d)
        per_t = np.array([integrate_array(w * R[k], d) for k in range(len(snaps))])
        worst = max(worst, abs(_time_integral(zeta(snaps.times) * per_t, snaps.times)))
    return worst


def entropy_slack(snaps: RunSnapshots) -> np.ndarray:
    """
    int rho0 log rho0 - int rho log rho (t) - int_0^t int rho div u, 每个快照时间一个值。
    连续意义下 eps > 0 时该量非负且单调不减。
    """
    d = snaps.domain
    ent = np.array([integrate_array(_entropy_density(r), d) for r in snaps.rho])
    work = np.array([integrate_array(r * dv, d) for r, dv in zip(snaps.rho, snaps.div_u())])
    cum = np.concatenate([[0.0], integrate.cumulative_trapezoid(work, snaps.times)]) \
        if len(snaps) > 1 else np.zeros(1)
    return ent[0] - ent - cum
