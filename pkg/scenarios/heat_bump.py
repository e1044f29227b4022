# aurora/scenarios/heat_bump.py

import numpy as np

from scenarios.base_scenario import InitialData, InitialFields
from solver.fields import MAGNETIC_BCS, ComplexField, ScalarField, VectorField3


class HeatBump(InitialData):
    """
    静止流体上的单模态数据, 密度、磁场与波函数各自有闭式的衰减/传播解:
        rho0 = rho_mean + rho_amp cos(pi x/Lx) cos(pi y/Ly)
        H0_3 = H_amp sin(pi x/Lx) sin(pi y/Ly)
        psi0 = psi_amp sin(pi x/Lx) sin(pi y/Ly)
    """

    def build(self, domain, rng):
        p = self.params
        X, Y = domain.mesh()
        cx, cy = np.pi * X / domain.Lx, np.pi * Y / domain.Ly
        rho = p.get("rho_mean", 1.0) + p.get("rho_amp", 0.5) * np.cos(cx) * np.cos(cy)
        mode = np.sin(cx) * np.sin(cy)
        H = np.zeros((3,) + domain.shape)
        H[2] = p.get("H_amp", 0.1) * mode
        return InitialFields(
            rho0=ScalarField(domain, rho),
            m0=VectorField3.zeros(domain),
            H0=VectorField3(domain, H, MAGNETIC_BCS),
            psi0=ComplexField(domain, p.get("psi_amp", 0.0) * mode),
        )
