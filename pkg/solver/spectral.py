# aurora/solver/spectral.py
"""
按轴奇偶性选择的快速正弦/余弦变换 (scipy.fft 的 DST-I / DCT-I)。

奇轴 ('odd'): 边界节点为 0, 只对内部节点做 DST-I, 波数 k = 1..n。
偶轴 ('even'): 对全部节点做 DCT-I, 波数 k = 0..n+1。
"""
from __future__ import annotations

import numpy as np
from scipy import fft

from solver.geometry import Domain

Parity = tuple[str, str]


def _axis_slice(parity: str) -> slice:
    return slice(1, -1) if parity == "odd" else slice(None)


def forward(values: np.ndarray, parity: Parity) -> np.ndarray:
    """正变换, 返回系数数组 (未归一化, 与 inverse 配对)。"""
    coeffs = values[_axis_slice(parity[0]), _axis_slice(parity[1])]
    for axis, p in enumerate(parity):
        if p == "odd":
            coeffs = fft.dst(coeffs, type=1, axis=axis)
        else:
            coeffs = fft.dct(coeffs, type=1, axis=axis)
    return coeffs


def inverse(coeffs: np.ndarray, parity: Parity, shape: tuple[int, int]) -> np.ndarray:
    """逆变换并嵌入完整节点网格, 奇轴的边界节点置 0。"""
    vals = coeffs
    for axis, p in enumerate(parity):
        if p == "odd":
            vals = fft.idst(vals, type=1, axis=axis)
        else:
            vals = fft.idct(vals, type=1, axis=axis)
    out = np.zeros(shape, dtype=vals.dtype)
    out[_axis_slice(parity[0]), _axis_slice(parity[1])] = vals
    return out


def _wavenumbers_1d(n: int, length: float, parity: str) -> np.ndarray:
    k = np.arange(1, n + 1) if parity == "odd" else np.arange(0, n + 2)
    return k * np.pi / length


def wavenumbers(domain: Domain, parity: Parity) -> tuple[np.ndarray, np.ndarray]:
    """与 forward 输出对齐的连续波数 kappa = k pi / L, 形状可广播。"""
    kx = _wavenumbers_1d(domain.nx, domain.Lx, parity[0])
    ky = _wavenumbers_1d(domain.ny, domain.Ly, parity[1])
    return kx[:, None], ky[None, :]


def centered_symbols(domain: Domain, parity: Parity) -> tuple[np.ndarray, np.ndarray]:
    """中心差分在各模态上的符号 sigma = sin(kappa h) / h。"""
    kx, ky = wavenumbers(domain, parity)
    return np.sin(kx * domain.hx) / domain.hx, np.sin(ky * domain.hy) / domain.hy


def discrete_symbols(domain: Domain, parity: Parity) -> tuple[np.ndarray, np.ndarray]:
    """五点 Laplace 在各模态上的符号 (4/h^2) sin^2(kappa h / 2)。"""
    kx, ky = wavenumbers(domain, parity)
    return ((2.0 * np.sin(0.5 * kx * domain.hx) / domain.hx) ** 2,
            (2.0 * np.sin(0.5 * ky * domain.hy) / domain.hy) ** 2)


def diffuse_implicit(values: np.ndarray, domain: Domain, parity: Parity,
                     coef_dt: float) -> np.ndarray:
    """
    向后 Euler 一步 (I - coef_dt * Delta_h) f_new = f, Delta_h 为带反射虚节点的五点 Laplace。

    系数矩阵是对角占优的 M 矩阵, 每行和为 1, 因此解是输入值的凸组合:
    最小值不降, 最大值不升。偶轴上零模态不变, 梯形积分守恒。
    """
    sx, sy = discrete_symbols(domain, parity)
    coeffs = forward(values, parity) / (1.0 + coef_dt * (sx + sy))
    return inverse(coeffs, parity, values.shape)


def diffuse(values: np.ndarray, domain: Domain, parity: Parity, coef_dt: float,
            symbol: str = "continuous") -> np.ndarray:
    """
    扩散方程 f_t = c * Laplace(f) 的逐模态精确指数解, 推进 coef_dt = c*dt。

    Args:
        values (np.ndarray): 节点值。
        domain (Domain): 区域。
        parity (tuple): 每个轴的奇偶性。
        coef_dt (float): 扩散系数乘时间步。
        symbol (str): 'continuous' 使用 kappa^2; 'centered' 使用中心差分符号 sigma^2,
            与离散梯度范数构成精确的能量平衡。

    Returns:
        np.ndarray: 推进后的节点值。
    """
    if symbol == "centered":
        sx, sy = centered_symbols(domain, parity)
    else:
        sx, sy = wavenumbers(domain, parity)
    coeffs = forward(values, parity)
    coeffs = coeffs * np.exp(-coef_dt * (sx ** 2 + sy ** 2))
    return inverse(coeffs, parity, values.shape)


def sine_amplitudes(values: np.ndarray) -> np.ndarray:
    """Dirichlet 场的正弦振幅 c_{kl}: f = sum c_{kl} sin sin。"""
    nx, ny = values.shape[0] - 2, values.shape[1] - 2
    return fft.dstn(values[1:-1, 1:-1], type=1) / ((nx + 1) * (ny + 1))
