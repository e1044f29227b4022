import numpy as np
import pytest

from solver.fields import MAGNETIC_BCS, ComplexField, ScalarField, VectorField3
from solver.galerkin import SystemState
from solver.geometry import Domain, GalerkinState, build_basis
from solver.lagrangian import FlowState


@pytest.fixture
def domain():
    return Domain(1.0, 1.0, 32, 32)


@pytest.fixture
def small_domain():
    return Domain(1.0, 1.0, 16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def basis(domain):
    return build_basis(domain, 6)


def cosine_density(domain, mean=1.0, amp=0.5):
    X, Y = domain.mesh()
    vals = mean + amp * np.cos(np.pi * X / domain.Lx) * np.cos(np.pi * Y / domain.Ly)
    return ScalarField(domain, vals, "neumann0")


def swirl_velocity(domain, amp=0.2):
    """无散、壁面为 0 的涡旋速度。"""
    X, Y = domain.mesh()
    ax, ay = np.pi * X / domain.Lx, np.pi * Y / domain.Ly
    u = np.zeros((3,) + domain.shape)
    u[0] = amp * np.sin(ax) ** 2 * np.sin(2 * ay)
    u[1] = -amp * np.sin(2 * ax) * np.sin(ay) ** 2
    return VectorField3(domain, u)


def planar_magnetic(domain, amp=0.1, axial=0.0):
    X, Y = domain.mesh()
    ax, ay = np.pi * X / domain.Lx, np.pi * Y / domain.Ly
    H = np.zeros((3,) + domain.shape)
    H[0] = amp * np.sin(ax) * np.cos(ay)
    H[1] = -amp * np.cos(ax) * np.sin(ay)
    H[2] = axial * np.sin(ax) * np.sin(ay)
    return VectorField3(domain, H, MAGNETIC_BCS)


def make_state(rho, coeffs, basis, H=None, psi=None):
    """由密度与 Galerkin 系数直接构造系统状态, 其余场取零。"""
    d = rho.domain
    return SystemState(
        rho=rho,
        galerkin=GalerkinState(n=len(coeffs), coeffs=coeffs),
        H=H if H is not None else VectorField3.zeros(d, MAGNETIC_BCS),
        psi=psi if psi is not None else ComplexField.zeros(d),
        flow=FlowState.identity(d),
        basis=basis,
        rho0=rho,
    )
