# aurora/solver/coupling.py
"""
相互作用函数 g, h, Schrödinger 势 G 以及外力势 f (F_ext = grad f)。

g, h 由 C^2 平台函数 S(t) = 6t^5 - 15t^4 + 10t^3 构造:
    g(v) = g_max * S((v - v_lo) / (v_hi - v_lo)),  supp g' = [v_lo, v_hi]
    h(s) = h_max * S(s / s_hi),                     supp h' = [0, s_hi]
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from solver.errors import ParameterError
from solver.fields import ScalarField


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def smoothstep_d1(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t ** 2 * (1.0 - t) ** 2, 0.0)


def smoothstep_d2(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


@dataclass(frozen=True)
class InteractionSpec:
    alpha: float = 0.0
    v_lo: float = 0.5
    v_hi: float = 2.0
    g_max: float = 1.0
    s_hi: float = 4.0
    h_max: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError(f"相互作用系数必须非负: alpha={self.alpha}")
        if not (0 < self.v_lo < self.v_hi):
            raise ParameterError(f"要求 0 < v_lo < v_hi, 得到 v_lo={self.v_lo}, v_hi={self.v_hi}")
        if self.s_hi <= 0:
            raise ParameterError(f"要求 s_hi > 0, 得到 {self.s_hi}")
        if self.g_max < 0 or self.h_max < 0:
            raise ParameterError("平台高度 g_max, h_max 必须非负")

    def _tv(self, v):
        return (np.asarray(v, dtype=float) - self.v_lo) / (self.v_hi - self.v_lo)

    def g(self, v):
        return self.g_max * smoothstep(self._tv(v))

    def dg(self, v):
        return self.g_max * smoothstep_d1(self._tv(v)) / (self.v_hi - self.v_lo)

    def d2g(self, v):
        return self.g_max * smoothstep_d2(self._tv(v)) / (self.v_hi - self.v_lo) ** 2

    def h(self, s):
        return self.h_max * smoothstep(np.asarray(s, dtype=float) / self.s_hi)

    def dh(self, s):
        return self.h_max * smoothstep_d1(np.asarray(s, dtype=float) / self.s_hi) / self.s_hi

    @property
    def dg_max(self) -> float:
        # S' 在 t = 1/2 处取最大值 15/8
        return self.g_max * 1.875 / (self.v_hi - self.v_lo)

    @property
    def dh_max(self) -> float:
        return self.h_max * 1.875 / self.s_hi

    def to_dict(self) -> dict:
        return asdict(self)


def default_interaction(alpha: float, **profile) -> InteractionSpec:
    """默认平台族: v_lo=0.5, v_hi=2, g_max=h_max=1, s_hi=4。"""
    return InteractionSpec(alpha=alpha, **profile)


def potential_G(spec: InteractionSpec, v: ScalarField, psi) -> ScalarField:
    """G = alpha g(v) h'(|psi|^2), 在 Lagrange 网格上逐点计算。"""
    if v.values.shape != psi.values.shape:
        raise ParameterError("v 与 psi 的形状不一致")
    if spec.alpha == 0:
        return ScalarField(v.domain, np.zeros(v.domain.shape), "none")
    vals = spec.alpha * spec.g(v.values) * spec.dh(np.abs(psi.values) ** 2)
    return ScalarField(v.domain, vals, "none")


def force_potential(spec: InteractionSpec, rho: ScalarField, J: np.ndarray, wsq: np.ndarray) -> ScalarField:
    """
    f = alpha (J/rho) g'(1/rho) h(|psi o Y|^2)。

    1/rho 落在 supp g' 之外 (包括真空 rho = 0) 的位置 f 恰为 0。
    """
    d = rho.domain
    out = np.zeros(d.shape)
    if spec.alpha == 0:
        return ScalarField(d, out, "none")
    r = rho.values
    mask = r * spec.v_hi > 1.0           # 1/rho < v_hi
    mask &= r * spec.v_lo < 1.0          # 1/rho > v_lo
    inv = 1.0 / r[mask]
    out[mask] = spec.alpha * np.asarray(J)[mask] * inv * spec.dg(inv) * spec.h(np.asarray(wsq)[mask])
    return ScalarField(d, out, "none")
