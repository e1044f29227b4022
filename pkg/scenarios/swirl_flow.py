# aurora/scenarios/swirl_flow.py

import numpy as np

from scenarios.base_scenario import InitialData, InitialFields
from solver.fields import MAGNETIC_BCS, ComplexField, ScalarField, VectorField3


class SwirlFlow(InitialData):
    """
    均匀密度上的涡旋流, 带平面磁场与行波包。

    u = u_amp (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)) 无散且在壁面为 0;
    H = H_amp (sin(pi x) cos(pi y), -cos(pi x) sin(pi y)) 满足理想导体条件。
    noise > 0 时给密度叠加由 seed 决定的小扰动。
    """

    def build(self, domain, rng):
        p = self.params
        X, Y = domain.mesh()
        ax, ay = np.pi * X / domain.Lx, np.pi * Y / domain.Ly
        rho = np.full(domain.shape, p.get("rho_mean", 1.0))
        noise = p.get("noise", 0.0)
        if noise > 0:
            rho = rho * (1.0 + noise * rng.uniform(-1.0, 1.0, size=domain.shape))

        u_amp = p.get("u_amp", 0.2)
        m = np.zeros((3,) + domain.shape)
        m[0] = u_amp * np.sin(ax) ** 2 * np.sin(2 * ay)
        m[1] = -u_amp * np.sin(2 * ax) * np.sin(ay) ** 2
        m[2] = p.get("u3_amp", 0.0) * np.sin(ax) * np.sin(ay)
        m *= rho

        H_amp = p.get("H_amp", 0.1)
        H = np.zeros((3,) + domain.shape)
        H[0] = H_amp * np.sin(ax) * np.cos(ay)
        H[1] = -H_amp * np.cos(ax) * np.sin(ay)

        k = p.get("psi_wavenumber", 4.0)
        psi = p.get("psi_amp", 0.3) * np.sin(ax) * np.sin(ay) * np.exp(1j * k * X)
        return InitialFields(
            rho0=ScalarField(domain, rho),
            m0=VectorField3(domain, m),
            H0=VectorField3(domain, H, MAGNETIC_BCS),
            psi0=ComplexField(domain, psi),
        )
