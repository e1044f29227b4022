# aurora/solver/geometry.py
"""
矩形区域、节点网格、Dirichlet Laplace 正弦特征基、谱投影 P_N 以及常数 C_N。

网格包含边界节点: x_i = i * hx, i = 0..nx+1, hx = Lx / (nx + 1)。
所有积分使用该节点网格上的复合梯形公式, 正弦模态在此求积下离散正交归一。
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Optional

import numpy as np

from solver.errors import CapacityError, PreconditionError, ShapeError

if TYPE_CHECKING:
    from solver.fields import VectorField3

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8


@dataclass(frozen=True)
class Domain:
    """矩形区域 [0, Lx] x [0, Ly] 及其内部分辨率 nx x ny。"""
    Lx: float = 1.0
    Ly: float = 1.0
    nx: int = 32
    ny: int = 32

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise ShapeError(f"区域边长必须为正: Lx={self.Lx}, Ly={self.Ly}")
        if self.nx < MIN_RESOLUTION or self.ny < MIN_RESOLUTION:
            raise ShapeError(f"分辨率过低: nx={self.nx}, ny={self.ny} (至少 {MIN_RESOLUTION})")

    @property
    def hx(self) -> float:
        return self.Lx / (self.nx + 1)

    @property
    def hy(self) -> float:
        return self.Ly / (self.ny + 1)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 2, self.ny + 2)

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.Lx, self.nx + 2)

    @cached_property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.Ly, self.ny + 2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """返回 indexing='ij' 的节点坐标 (X, Y)。"""
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def weights(self) -> np.ndarray:
        """二维梯形求积权重, 对常数精确。"""
        wx = np.full(self.nx + 2, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny + 2, self.hy)
        wy[[0, -1]] *= 0.5
        w = np.outer(wx, wy)
        w.setflags(write=False)
        return w

    def refined(self, factor: int) -> "Domain":
        """节点嵌套的加密网格: 每个原网格间距细分为 factor 份。"""
        return Domain(self.Lx, self.Ly, factor * (self.nx + 1) - 1, factor * (self.ny + 1) - 1)

    def points(self) -> np.ndarray:
        """所有节点坐标, 形状 (nx+2, ny+2, 2)。"""
        X, Y = self.mesh()
        return np.stack([X, Y], axis=-1)

    def to_dict(self) -> dict:
        return {"Lx": self.Lx, "Ly": self.Ly, "nx": self.nx, "ny": self.ny}


@dataclass(frozen=True, eq=False)
class SineBasis:
    """
    Dirichlet Laplace 的前 n 个特征对 eta_{k,l} = 2/sqrt(Lx Ly) sin(k pi x/Lx) sin(l pi y/Ly)。

    modes 按特征值升序排列, 相同特征值按 (k, l) 字典序。
    """
    domain: Domain
    modes: np.ndarray        # (n, 2) 整数波数 (k, l)
    eigenvalues: np.ndarray  # (n,)

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def norm(self) -> float:
        return 2.0 / np.sqrt(self.domain.area)

    @property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.modes[:, 0] * np.pi / self.domain.Lx,
                self.modes[:, 1] * np.pi / self.domain.Ly)

    @cached_property
    def values(self) -> np.ndarray:
        """网格上的基函数值, 形状 (n, nx+2, ny+2)。"""
        return self.evaluate(self.domain.x, self.domain.y)

    @cached_property
    def gradients(self) -> np.ndarray:
        """网格上的解析梯度, 形状 (n, 2, nx+2, ny+2)。"""
        return self.evaluate_gradient(self.domain.x, self.domain.y)

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """在张量网格 x (mx,) 与 y (my,) 上求基函数值, 形状 (n, mx, my)。"""
        kx, ky = self.wavenumbers
        sx = np.sin(np.outer(kx, x))
        sy = np.sin(np.outer(ky, y))
        return self.norm * sx[:, :, None] * sy[:, None, :]

    def evaluate_gradient(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        kx, ky = self.wavenumbers
        sx, cx = np.sin(np.outer(kx, x)), np.cos(np.outer(kx, x))
        sy, cy = np.sin(np.outer(ky, y)), np.cos(np.outer(ky, y))
        dx = self.norm * (kx[:, None, None] * cx[:, :, None]) * sy[:, None, :]
        dy = self.norm * sx[:, :, None] * (ky[:, None, None] * cy[:, None, :])
        return np.stack([dx, dy], axis=1)

    def evaluate_points(self, pts: np.ndarray, count: Optional[int] = None):
        """
        在任意点集上求前 count 个基函数的值与梯度。

        Args:
            pts (np.ndarray): 形状 (..., 2) 的坐标。
            count (int): 使用的模态数, 默认全部。

        Returns:
            tuple: (values (count, ...), gradients (count, 2, ...))
        """
        count = self.n if count is None else count
        kx, ky = (w[:count] for w in self.wavenumbers)
        px = pts[..., 0][None]
        py = pts[..., 1][None]
        ex = (...,) + (None,) * pts[..., 0].ndim
        kx, ky = kx[ex], ky[ex]
        sx, cx = np.sin(kx * px), np.cos(kx * px)
        sy, cy = np.sin(ky * py), np.cos(ky * py)
        vals = self.norm * sx * sy
        grads = self.norm * np.stack([kx * cx * sy, ky * sx * cy], axis=1)
        return vals, grads

    def grad_sup_analytic(self) -> np.ndarray:
        """||grad eta_{k,l}||_inf = 2/sqrt(Lx Ly) * max(k pi/Lx, l pi/Ly)。"""
        kx, ky = self.wavenumbers
        return self.norm * np.maximum(kx, ky)


@dataclass
class GalerkinState:
    """动量系数 u_j^N(t), 每个模态三个分量; b 为积分形式的动量泛函。"""
    n: int
    coeffs: np.ndarray                # (n, 3)
    t: float = 0.0
    b: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(self.n, 3)

    @property
    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs ** 2)))

    def truncated(self, N: int) -> np.ndarray:
        """P_N: 保留前 N 个模态的系数。"""
        return self.coeffs[:N]


def build_basis(domain: Domain, n: int) -> SineBasis:
    """
    构造前 n 个 Dirichlet 特征对。

    Args:
        domain (Domain): 矩形区域。
        n (int): 模态数, 1 <= n <= nx*ny。

    Returns:
        SineBasis: 按特征值升序排列的正弦基。
    """
    if n < 1:
        raise PreconditionError(f"模态数必须 >= 1, 得到 n={n}")
    if n > domain.nx * domain.ny:
        raise CapacityError(f"模态数 n={n} 超过网格容量 {domain.nx}x{domain.ny}")

    k, l = np.meshgrid(np.arange(1, domain.nx + 1), np.arange(1, domain.ny + 1), indexing="ij")
    k, l = k.ravel(), l.ravel()
    lam = np.pi ** 2 * (k ** 2 / domain.Lx ** 2 + l ** 2 / domain.Ly ** 2)
    # 舍入到 12 位有效数字, 避免浮点噪声破坏字典序
    lam_key = np.round(lam / lam.min(), 12)
    order = np.lexsort((l, k, lam_key))[:n]

    modes = np.stack([k[order], l[order]], axis=1)
    logger.debug("构造正弦基: n=%d, 最大特征值=%.6g", n, lam[order][-1])
    return SineBasis(domain=domain, modes=modes, eigenvalues=lam[order])


def synthesize(basis: SineBasis, coeffs: np.ndarray) -> np.ndarray:
    """由系数 (m, 3) 合成网格速度, 形状 (3, nx+2, ny+2)。"""
    m = len(coeffs)
    return np.einsum("jc,jxy->cxy", coeffs, basis.values[:m])


def synthesize_gradient(basis: SineBasis, coeffs: np.ndarray) -> np.ndarray:
    """合成速度的解析梯度, 形状 (3, 2, nx+2, ny+2), 下标为 [分量, 方向]。"""
    m = len(coeffs)
    return np.einsum("jc,jdxy->cdxy", coeffs, basis.gradients[:m])


def project_velocity(u: "VectorField3", basis: SineBasis, N: int) -> GalerkinState:
    """
    谱投影 P_N: 系数 j 为 u 各分量与 eta_j 的离散内积。
    """
    if u.domain != basis.domain:
        raise ShapeError("速度场与正弦基的网格不一致")
    if any(tag != "dirichlet0" for tag in u.bcs):
        raise PreconditionError(f"投影要求齐次 Dirichlet 速度场, 得到边界标签 {u.bcs}")
    if N < 1 or N > basis.n:
        raise CapacityError(f"投影维数 N={N} 不在 [1, {basis.n}] 内")

    w = basis.domain.weights
    coeffs = np.einsum("cxy,jxy->jc", u.values * w, basis.values[:N])
    return GalerkinState(n=N, coeffs=coeffs)


def grad_sup_constant(basis: SineBasis, N: int, refine: int = 4) -> float:
    """
    C_N = N * max_{j<=N} ||grad eta_j||_inf。

    上确界取加密网格上的最大值与解析边界极值候选中的较大者。
    """
    if N < 1:
        raise PreconditionError(f"C_N 要求 N >= 1, 得到 N={N}")
    if N > basis.n:
        raise CapacityError(f"N={N} 超过基的维数 {basis.n}")

    fine = basis.domain.refined(refine)
    sub = SineBasis(basis.domain, basis.modes[:N], basis.eigenvalues[:N])
    grads = sub.evaluate_gradient(fine.x, fine.y)
    grid_sup = np.sqrt(grads[:, 0] ** 2 + grads[:, 1] ** 2).max(axis=(1, 2))
    sup = np.maximum(grid_sup, sub.grad_sup_analytic())
    return float(N * sup.max())


def write_basis_table(basis: SineBasis, path: str) -> None:
    """导出基的摘要表: j,k,l,eigenvalue,grad_sup。"""
    sups = basis.grad_sup_analytic()
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["j", "k", "l", "eigenvalue", "grad_sup"])
        for j, ((k, l), lam, s) in enumerate(zip(basis.modes, basis.eigenvalues, sups), start=1):
            writer.writerow([j, int(k), int(l), repr(float(lam)), repr(float(s))])
