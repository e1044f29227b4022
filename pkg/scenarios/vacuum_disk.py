# aurora/scenarios/vacuum_disk.py

import numpy as np

from scenarios.base_scenario import InitialData, InitialFields
from solver.fields import MAGNETIC_BCS, ComplexField, ScalarField, VectorField3


class VacuumDisk(InitialData):
    """
    含真空区域的数据: 以 center 为心、半径 radius 的圆盘内 rho0 = 0, 其余为 rho_out。
    动量 m0 = rho0 * 剪切流, 因此在圆盘内为 0; 波函数是居中的 Gauss 包络。
    """

    def build(self, domain, rng):
        p = self.params
        cx, cy = p.get("center", [0.5 * domain.Lx, 0.5 * domain.Ly])
        radius = p.get("radius", 0.2 * min(domain.Lx, domain.Ly))
        X, Y = domain.mesh()
        r = np.sqrt((X - cx) ** 2 + (Y - cy) ** 2)
        rho = np.where(r < radius, 0.0, p.get("rho_out", 1.0))

        sx, sy = np.sin(np.pi * X / domain.Lx), np.sin(np.pi * Y / domain.Ly)
        m = np.zeros((3,) + domain.shape)
        m[0] = p.get("u_amp", 0.1) * rho * sx * np.sin(2 * np.pi * Y / domain.Ly)
        m[1] = -p.get("u_amp", 0.1) * rho * np.sin(2 * np.pi * X / domain.Lx) * sy

        H = np.zeros((3,) + domain.shape)
        H[2] = p.get("H_amp", 0.05) * sx * sy

        width = p.get("psi_width", 0.15)
        psi = p.get("psi_amp", 0.5) * np.exp(-r ** 2 / (2 * width ** 2)) * sx * sy
        return InitialFields(
            rho0=ScalarField(domain, rho),
            m0=VectorField3(domain, m),
            H0=VectorField3(domain, H, MAGNETIC_BCS),
            psi0=ComplexField(domain, psi.astype(complex)),
        )
