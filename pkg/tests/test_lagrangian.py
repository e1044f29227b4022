from dataclasses import replace

import numpy as np
import pytest

from solver.errors import GeometryError, ShapeError
from solver.fields import ComplexField, ScalarField, VectorField3, interp_array
from solver.geometry import (Domain, build_basis, grad_sup_constant, synthesize,
                             synthesize_gradient)
from solver.lagrangian import (FlowState, GalerkinVelocity, GridVelocity, jacobian_bound_check,
                               jacobian_fd_determinant, pullback_wave_sq, specific_volume,
                               step_flow)


class ConstantVelocity:
    def __init__(self, vel):
        self.vel = np.asarray(vel, dtype=float)

    def velocity(self, pts):
        return np.broadcast_to(self.vel, pts.shape).copy()

    def divergence(self, pts):
        return np.zeros(pts.shape[:-1])


def compressible_coeffs():
    coeffs = np.zeros((4, 3))
    coeffs[0, 0] = 0.05
    coeffs[1, 1] = 0.05
    coeffs[2, 0] = -0.03
    return coeffs


def shear_coeffs():
    coeffs = np.zeros((4, 3))
    coeffs[0, 0] = 0.04
    coeffs[1, 0] = 0.02
    return coeffs


def pulsating_coeffs(t):
    coeffs = np.zeros((4, 3))
    coeffs[0, 1] = -0.04
    coeffs[3, 0] = 0.03
    coeffs[2, 1] = 0.02
    return (1.0 + 0.5 * np.sin(2 * np.pi * t)) * coeffs


FLOWS = {
    "compressible": lambda t: compressible_coeffs(),
    "shear": lambda t: shear_coeffs(),
    "pulsating": pulsating_coeffs,
}


def run_flow(domain, coeffs, dt, steps, relabel_every=None):
    """coeffs 为数组或 t -> 数组 (每步在中点取值并冻结)。"""
    coeff_fn = coeffs if callable(coeffs) else (lambda t: coeffs)
    basis = build_basis(domain, len(coeff_fn(0.0)))
    fs = FlowState.identity(domain)
    for _ in range(steps):
        sampler = GalerkinVelocity(basis, coeff_fn(fs.t + 0.5 * dt))
        fs = step_flow(fs, sampler, dt, relabel_every=relabel_every)
    return fs, basis


def test_zero_velocity_keeps_identity(small_domain):
    fs = FlowState.identity(small_domain)
    out = step_flow(fs, VectorField3.zeros(small_domain), 0.1)
    np.testing.assert_allclose(out.Y, small_domain.points(), atol=1e-14)
    np.testing.assert_allclose(out.phi, small_domain.points(), atol=1e-14)
    assert not np.any(out.A)
    assert out.t == pytest.approx(0.1)


@pytest.mark.parametrize("flow", sorted(FLOWS))
def test_jacobian_matches_label_determinant(flow):
    d = Domain(1.0, 1.0, 127, 127)
    fs, _ = run_flow(d, FLOWS[flow], dt=0.0125, steps=40)
    assert fs.t == pytest.approx(0.5)
    assert np.max(np.abs(fs.A)) > 1e-2
    det = jacobian_fd_determinant(fs)
    assert np.max(np.abs(det - fs.jacobian)) < 1e-4


def test_fd_determinant_is_exact_for_cubic_labels():
    d = Domain(1.0, 1.0, 15, 15)
    x = d.points()
    Y = np.stack([x[..., 0] + 0.1 * x[..., 0] ** 3, x[..., 1] - 0.2 * x[..., 0] * x[..., 1]], axis=-1)
    fs = replace(FlowState.identity(d), Y=Y)
    X = x[..., 0]
    exact = (1 + 0.3 * X ** 2) * (1 - 0.2 * X)
    np.testing.assert_allclose(jacobian_fd_determinant(fs), exact, atol=1e-12)


def test_labels_invert_forward_flow():
    d = Domain(1.0, 1.0, 63, 63)
    fs, _ = run_flow(d, compressible_coeffs(), dt=1e-2, steps=30)
    back = fs.label_at(fs.phi)
    np.testing.assert_allclose(back, d.points(), atol=1e-4)


def test_forward_and_eulerian_accumulators_agree():
    d = Domain(1.0, 1.0, 63, 63)
    fs, _ = run_flow(d, compressible_coeffs(), dt=1e-2, steps=30)
    # a(t; x) = A(t, Phi(t; x))
    A_at_phi = interp_array(fs.A, d, "neumann0", fs.phi)
    np.testing.assert_allclose(A_at_phi, fs.a, atol=1e-3)


def test_relabel_resets_history_and_keeps_labels():
    d = Domain(1.0, 1.0, 63, 63)
    exact, _ = run_flow(d, compressible_coeffs(), dt=1e-2, steps=12)
    fs, _ = run_flow(d, compressible_coeffs(), dt=1e-2, steps=12, relabel_every=5)
    assert len(exact.history) == 12 and exact.anchor_Y is None
    assert len(fs.history) == 2 and fs.anchor_Y is not None
    np.testing.assert_allclose(fs.Y, exact.Y, atol=1e-4)
    np.testing.assert_allclose(fs.A, exact.A, atol=1e-3)
    np.testing.assert_allclose(fs.phi, exact.phi, atol=1e-14)


def test_galerkin_sampler_owns_its_coefficients(domain):
    basis = build_basis(domain, 4)
    coeffs = compressible_coeffs()
    sampler = GalerkinVelocity(basis, coeffs)
    pts = np.array([[0.3, 0.4]])
    before = sampler.velocity(pts)
    coeffs *= 10.0
    np.testing.assert_array_equal(sampler.velocity(pts), before)


def test_grid_sampler_agrees_with_galerkin_sampler(domain):
    basis = build_basis(domain, 4)
    coeffs = compressible_coeffs()
    u = VectorField3(domain, synthesize(basis, coeffs))
    pts = np.array([[0.3, 0.4], [0.71, 0.22]])
    exact = GalerkinVelocity(basis, coeffs)
    grid = GridVelocity(u)
    np.testing.assert_allclose(grid.velocity(pts), exact.velocity(pts), atol=1e-5)
    np.testing.assert_allclose(grid.divergence(pts), exact.divergence(pts), atol=1e-2)


def test_exit_raises_geometry_error(small_domain):
    fs = FlowState.identity(small_domain)
    with pytest.raises(GeometryError):
        step_flow(fs, ConstantVelocity([1.0, 0.0]), 0.1)


def test_shape_mismatch(small_domain, domain):
    fs = FlowState.identity(small_domain)
    bad = replace(fs, domain=domain)
    with pytest.raises(ShapeError):
        step_flow(bad, ConstantVelocity([0.0, 0.0]), 0.1)


def test_jacobian_bound_check():
    d = Domain(1.0, 1.0, 31, 31)
    coeffs = compressible_coeffs()[:3]
    dt, steps = 5e-3, 40
    fs, basis = run_flow(d, coeffs, dt, steps)
    gu = synthesize_gradient(basis, coeffs)
    increment = dt * float(np.sum(d.weights * np.sum(gu ** 2, axis=(0, 1))))
    C_N = grad_sup_constant(basis, 3)
    ok, margin = jacobian_bound_check(fs, C_N, [increment] * steps)
    assert ok and margin > 0

    tampered = replace(fs, A=fs.A + 100.0)
    ok, margin = jacobian_bound_check(tampered, C_N, [increment] * steps)
    assert not ok and margin < 0


def test_specific_volume(small_domain):
    fs = FlowState.identity(small_domain)
    v = specific_volume(ScalarField(small_domain, np.full(small_domain.shape, 2.0)), fs)
    np.testing.assert_allclose(v.values, 0.5, rtol=1e-12)
    v = specific_volume(ScalarField(small_domain, np.zeros(small_domain.shape)), fs, rho_floor=1e-6)
    np.testing.assert_allclose(v.values, 1e6)


def test_pullback_identity(small_domain, rng):
    vals = rng.normal(size=small_domain.shape) + 1j * rng.normal(size=small_domain.shape)
    vals[[0, -1], :] = 0.0
    vals[:, [0, -1]] = 0.0
    psi = ComplexField(small_domain, vals)
    wsq = pullback_wave_sq(psi, FlowState.identity(small_domain))
    np.testing.assert_allclose(wsq.values, np.abs(vals) ** 2, atol=1e-10)
    zero = pullback_wave_sq(ComplexField.zeros(small_domain), FlowState.identity(small_domain))
    assert not np.any(zero.values)
