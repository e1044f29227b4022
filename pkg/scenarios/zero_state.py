# aurora/scenarios/zero_state.py

import numpy as np

from scenarios.base_scenario import InitialData, InitialFields
from solver.fields import MAGNETIC_BCS, ComplexField, ScalarField, VectorField3


class ZeroState(InitialData):
    """全零数据: 真空密度, 静止流体, 无磁场, 无波。"""

    def build(self, domain, rng):
        return InitialFields(
            rho0=ScalarField(domain, np.zeros(domain.shape)),
            m0=VectorField3.zeros(domain),
            H0=VectorField3.zeros(domain, MAGNETIC_BCS),
            psi0=ComplexField.zeros(domain),
        )
