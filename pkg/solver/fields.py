# aurora/solver/fields.py
"""
网格上的标量/向量/复值场, 求积、范数、插值与 Helmholtz 散度清理。

边界标签决定每个轴上的奇偶延拓:
    dirichlet0 -> (奇, 奇)      neumann0 -> (偶, 偶)
    normal_x   -> (奇, 偶)      normal_y -> (偶, 奇)
    none       -> 无延拓, 差分使用二阶单侧闭合
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from solver import spectral
from solver.errors import DomainError, NumericalError, ParameterError, ShapeError
from solver.geometry import Domain

logger = logging.getLogger(__name__)

BC_PARITY: dict[str, tuple[Optional[str], Optional[str]]] = {
    "dirichlet0": ("odd", "odd"),
    "neumann0": ("even", "even"),
    "normal_x": ("odd", "even"),
    "normal_y": ("even", "odd"),
    "none": (None, None),
}

# 平面磁场采用理想导体壁: 法向分量为 0, 切向分量满足 Neumann 条件
MAGNETIC_BCS = ("normal_x", "normal_y", "dirichlet0")
VELOCITY_BCS = ("dirichlet0", "dirichlet0", "dirichlet0")

INTERP_PAD = 8


def _check_bc(bc: str) -> str:
    if bc not in BC_PARITY:
        raise ShapeError(f"未知的边界标签: {bc}")
    return bc


@dataclass
class ScalarField:
    domain: Domain
    values: np.ndarray
    bc: str = "neumann0"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        _check_bc(self.bc)
        if self.values.shape != self.domain.shape:
            raise ShapeError(f"标量场形状 {self.values.shape} 与网格 {self.domain.shape} 不一致")

    @property
    def parity(self):
        return BC_PARITY[self.bc]

    def copy(self) -> "ScalarField":
        return ScalarField(self.domain, self.values.copy(), self.bc)


@dataclass
class VectorField3:
    """三分量向量场 (分量与第三个坐标无关), values 形状 (3, nx+2, ny+2)。"""
    domain: Domain
    values: np.ndarray
    bcs: tuple[str, str, str] = VELOCITY_BCS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.bcs = tuple(_check_bc(b) for b in self.bcs)
        if self.values.shape != (3,) + self.domain.shape:
            raise ShapeError(f"向量场形状 {self.values.shape} 与网格 {self.domain.shape} 不一致")

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.domain, self.values[i], self.bcs[i])

    @classmethod
    def zeros(cls, domain: Domain, bcs=VELOCITY_BCS) -> "VectorField3":
        return cls(domain, np.zeros((3,) + domain.shape), bcs)

    def copy(self) -> "VectorField3":
        return VectorField3(self.domain, self.values.copy(), self.bcs)


@dataclass
class ComplexField:
    """复值波函数, 齐次 Dirichlet 边界。"""
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.domain.shape:
            raise ShapeError(f"复值场形状 {self.values.shape} 与网格 {self.domain.shape} 不一致")

    @property
    def bc(self) -> str:
        return "dirichlet0"

    @property
    def real(self) -> ScalarField:
        return ScalarField(self.domain, self.values.real, "dirichlet0")

    @property
    def imag(self) -> ScalarField:
        return ScalarField(self.domain, self.values.imag, "dirichlet0")

    @classmethod
    def zeros(cls, domain: Domain) -> "ComplexField":
        return cls(domain, np.zeros(domain.shape, dtype=complex))


# ---------------------------------------------------------------------------
# 求积与范数
# ---------------------------------------------------------------------------

def integrate_array(values: np.ndarray, domain: Domain) -> float:
    return float(np.sum(domain.weights * values))


def integrate(f: ScalarField) -> float:
    """复合梯形求积, 对常数精确。"""
    return integrate_array(f.values, f.domain)


def lp_norm(f: ScalarField, p: float = 2.0) -> float:
    if not (np.isfinite(p) and p >= 1):
        raise ParameterError(f"指数 p 必须有限且 >= 1, 得到 {p}")
    return integrate_array(np.abs(f.values) ** p, f.domain) ** (1.0 / p)


def h1_seminorm(f: ScalarField) -> float:
    gx, gy = gradient(f)
    return np.sqrt(integrate_array(gx ** 2 + gy ** 2, f.domain))


# ---------------------------------------------------------------------------
# 差分算子
# ---------------------------------------------------------------------------

def diff(values: np.ndarray, axis: int, h: float, parity: Optional[str]) -> np.ndarray:
    """
    二阶中心差分。parity 为 'odd'/'even' 时用反射虚节点闭合边界,
    为 None 时用二阶单侧差分。
    """
    if parity is None:
        return np.gradient(values, h, axis=axis, edge_order=2)
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 1)
    ext = np.pad(values, pad, mode="reflect", reflect_type=parity)
    fwd = [slice(None)] * values.ndim
    bwd = [slice(None)] * values.ndim
    fwd[axis] = slice(2, None)
    bwd[axis] = slice(None, -2)
    return (ext[tuple(fwd)] - ext[tuple(bwd)]) / (2.0 * h)


def gradient_array(values: np.ndarray, domain: Domain, bc: str):
    px, py = BC_PARITY[bc]
    return diff(values, 0, domain.hx, px), diff(values, 1, domain.hy, py)


def gradient(f: ScalarField):
    return gradient_array(f.values, f.domain, f.bc)


def divergence(F: VectorField3) -> np.ndarray:
    """平面散度 d_x F1 + d_y F2。"""
    d = F.domain
    return (diff(F.values[0], 0, d.hx, BC_PARITY[F.bcs[0]][0])
            + diff(F.values[1], 1, d.hy, BC_PARITY[F.bcs[1]][1]))


def curl(F: VectorField3) -> np.ndarray:
    """2.5 维旋度 (d_y F3, -d_x F3, d_x F2 - d_y F1), 形状 (3, nx+2, ny+2)。"""
    d = F.domain
    p = [BC_PARITY[b] for b in F.bcs]
    return np.stack([
        diff(F.values[2], 1, d.hy, p[2][1]),
        -diff(F.values[2], 0, d.hx, p[2][0]),
        diff(F.values[1], 0, d.hx, p[1][0]) - diff(F.values[0], 1, d.hy, p[0][1]),
    ])


def apply_bc(values: np.ndarray, bc: str) -> np.ndarray:
    """将奇轴上的边界节点置 0。"""
    out = np.array(values, copy=True)
    px, py = BC_PARITY[bc]
    if px == "odd":
        out[[0, -1], :] = 0.0
    if py == "odd":
        out[:, [0, -1]] = 0.0
    return out


# ---------------------------------------------------------------------------
# Helmholtz 散度清理
# ---------------------------------------------------------------------------

def helmholtz_clean(H: VectorField3) -> VectorField3:
    """
    将平面部分 (H1, H2) 替换为其离散无散投影, 第三分量不变。

    H1 展开为 sin(x) cos(y) 模态, H2 展开为 cos(x) sin(y) 模态, 中心差分散度
    在公共模态块上为 sigma_x a + sigma_y b; 从中减去离散梯度 (对应 Neumann 势函数)
    之后散度在舍入误差内为 0, 离散旋度不变。
    """
    d = H.domain
    if H.bcs[:2] != MAGNETIC_BCS[:2]:
        raise ShapeError(f"散度清理要求平面分量标签 {MAGNETIC_BCS[:2]}, 得到 {H.bcs[:2]}")

    a = spectral.forward(H.values[0], ("odd", "even"))   # (nx, ny+2)
    b = spectral.forward(H.values[1], ("even", "odd"))   # (nx+2, ny)
    sx, _ = spectral.centered_symbols(d, ("odd", "even"))
    _, sy = spectral.centered_symbols(d, ("even", "odd"))
    sx = sx[:, :1]           # k = 1..nx
    sy = sy[:1, :]           # l = 1..ny

    a_in = a[:, 1:-1]
    b_in = b[1:-1, :]
    s = (sx * a_in + sy * b_in) / (sx ** 2 + sy ** 2)
    a_in -= sx * s
    b_in -= sy * s
    # 只含单个分量的模态是纯梯度
    a[:, 0] = 0.0
    a[:, -1] = 0.0
    b[0, :] = 0.0
    b[-1, :] = 0.0

    out = np.empty_like(H.values)
    out[0] = spectral.inverse(a, ("odd", "even"), d.shape)
    out[1] = spectral.inverse(b, ("even", "odd"), d.shape)
    out[2] = H.values[2]
    if not np.all(np.isfinite(out)):
        raise NumericalError("散度清理产生非有限值")
    return VectorField3(d, out, H.bcs)


# ---------------------------------------------------------------------------
# 插值
# ---------------------------------------------------------------------------

def _padded(values: np.ndarray, bc: str, pad: int = INTERP_PAD) -> np.ndarray:
    out = values
    for axis, parity in enumerate(BC_PARITY[bc]):
        width = [(0, 0)] * values.ndim
        width[axis] = (pad, pad)
        out = np.pad(out, width, mode="reflect", reflect_type=parity or "odd")
    return out


def interp_array(values: np.ndarray, domain: Domain, bc: str, pts: np.ndarray) -> np.ndarray:
    """
    不做区域检查的三次样条插值; pts 形状 (..., 2)。

    按边界标签做奇/偶延拓后调用 scipy.ndimage.map_coordinates(order=3)。
    """
    ext = _padded(values, bc)
    cx = pts[..., 0] / domain.hx + INTERP_PAD
    cy = pts[..., 1] / domain.hy + INTERP_PAD
    coords = np.stack([cx.ravel(), cy.ravel()])
    out = ndimage.map_coordinates(ext, coords, order=3, mode="nearest")
    return out.reshape(pts.shape[:-1])


def interpolate(f: ScalarField, pts) -> np.ndarray:
    """
    在任意点上插值标量场, 点必须位于闭区域内。

    Args:
        f (ScalarField): 被插值的场, 边界标签决定延拓方式。
        pts: 形状 (..., 2) 的点坐标。

    Returns:
        np.ndarray: 形状 pts.shape[:-1] 的插值结果。
    """
    pts = np.asarray(pts, dtype=float)
    d = f.domain
    tol = 1e-12 * max(d.Lx, d.Ly)
    outside = ((pts[..., 0] < -tol) | (pts[..., 0] > d.Lx + tol)
               | (pts[..., 1] < -tol) | (pts[..., 1] > d.Ly + tol))
    if np.any(outside):
        raise DomainError(f"{int(np.sum(outside))} 个插值点位于区域之外")
    return interp_array(f.values, d, f.bc, pts)
