# aurora/solver/nls.py
"""
三次 NLS: i psi_t + Laplace(psi) = |psi|^2 psi + G psi, Dirichlet 边界。

Strang 分裂: 半步精确相位旋转, 整步正弦谱线性传播, 再半步相位旋转。两个子步都是
酉的, 离散 L2 质量逐步守恒至舍入误差。
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft

from solver import spectral
from solver.coupling import InteractionSpec
from solver.errors import ParameterError, ShapeError
from solver.fields import ComplexField, ScalarField, integrate_array


@dataclass(frozen=True)
class WaveParams:
    dt: float
    substeps: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ParameterError(f"时间步长必须为正: dt={self.dt}")
        if self.substeps < 1:
            raise ParameterError(f"子步数必须 >= 1: {self.substeps}")


def _linear_propagator(domain, dt: float) -> np.ndarray:
    kx, ky = spectral.wavenumbers(domain, ("odd", "odd"))
    return np.exp(-1j * (kx ** 2 + ky ** 2) * dt)


def step_wave(psi: ComplexField, G: Optional[ScalarField], p: WaveParams) -> ComplexField:
    """
    以冻结的势 G 推进 p.substeps 个子步, 每个子步长 p.dt。
    G 为 None 时视为 0。
    """
    d = psi.domain
    if G is not None and G.domain != d:
        raise ShapeError("势函数 G 与波函数的网格不一致")
    pot = np.zeros(d.shape) if G is None else G.values
    prop = _linear_propagator(d, p.dt)
    half = 0.5 * p.dt

    vals = psi.values.copy()
    for _ in range(p.substeps):
        vals *= np.exp(-1j * half * (np.abs(vals) ** 2 + pot))
        inner = fft.idstn(fft.dstn(vals[1:-1, 1:-1], type=1) * prop, type=1)
        vals = np.zeros_like(vals)
        vals[1:-1, 1:-1] = inner
        vals *= np.exp(-1j * half * (np.abs(vals) ** 2 + pot))
    return ComplexField(d, vals)


def wave_mass(psi: ComplexField) -> float:
    return integrate_array(np.abs(psi.values) ** 2, psi.domain)


def wave_energy_terms(psi: ComplexField, spec: Optional[InteractionSpec] = None,
                      v: Optional[ScalarField] = None) -> dict:
    """
    波能量各项: 1/2||grad psi||^2 (正弦谱计算), 1/4||psi||_4^4, alpha int g(v)h(|psi|^2)。
    """
    d = psi.domain
    c = spectral.sine_amplitudes(psi.values)
    kx, ky = spectral.wavenumbers(d, ("odd", "odd"))
    grad_sq = 0.25 * d.area * float(np.sum((kx ** 2 + ky ** 2) * np.abs(c) ** 2))
    dens = np.abs(psi.values) ** 2
    coupling = 0.0
    if spec is not None and v is not None and spec.alpha > 0:
        coupling = spec.alpha * integrate_array(spec.g(v.values) * spec.h(dens), d)
    return {
        "wave_kinetic": 0.5 * grad_sq,
        "wave_quartic": 0.25 * integrate_array(dens ** 2, d),
        "wave_coupling": coupling,
    }


def wave_energy(psi: ComplexField, spec: Optional[InteractionSpec] = None,
                v: Optional[ScalarField] = None) -> float:
    return float(sum(wave_energy_terms(psi, spec, v).values()))


def wave_row(t: float, psi: ComplexField, spec=None, v=None) -> dict:
    row = {"t": t, "mass": wave_mass(psi)}
    row.update(wave_energy_terms(psi, spec, v))
    return row
