import numpy as np
import pytest

from solver.coupling import (InteractionSpec, default_interaction, force_potential, potential_G,
                             smoothstep, smoothstep_d1)
from solver.errors import ParameterError
from solver.fields import ComplexField, ScalarField


def test_smoothstep_endpoints_and_symmetry():
    t = np.linspace(0, 1, 11)
    s = smoothstep(t)
    assert s[0] == 0.0 and s[-1] == 1.0
    np.testing.assert_allclose(s + s[::-1], 1.0, atol=1e-14)
    assert smoothstep(-3.0) == 0.0 and smoothstep(4.0) == 1.0


def test_smoothstep_derivative_matches_difference():
    t = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (smoothstep(t + h) - smoothstep(t - h)) / (2 * h)
    np.testing.assert_allclose(smoothstep_d1(t), fd, atol=1e-6)


def test_profile_supports():
    spec = default_interaction(1.0)
    v = np.linspace(0.0, 3.0, 300)
    dg = spec.dg(v)
    assert np.all(dg[(v <= spec.v_lo) | (v >= spec.v_hi)] == 0.0)
    assert np.all(dg[(v > spec.v_lo) & (v < spec.v_hi)] > 0.0)
    assert spec.g(0.1) == 0.0 and spec.g(2.5) == pytest.approx(spec.g_max)

    s = np.linspace(0.0, 6.0, 61)
    assert np.all(spec.dh(s)[s >= spec.s_hi] == 0.0)


def test_derivative_maxima():
    spec = InteractionSpec(alpha=1.0, v_lo=0.5, v_hi=2.0, g_max=2.0, s_hi=3.0)
    v = np.linspace(0.0, 3.0, 30001)
    assert spec.dg_max == pytest.approx(spec.dg(v).max(), rel=1e-6)
    assert spec.dg_max == pytest.approx(spec.dg(1.25), rel=1e-12)
    s = np.linspace(0.0, 4.0, 40001)
    assert spec.dh_max == pytest.approx(spec.dh(s).max(), rel=1e-6)


def test_second_derivative_is_bounded_and_continuous():
    spec = InteractionSpec(alpha=1.0, v_lo=0.5, v_hi=2.0, g_max=2.0)
    v = np.linspace(0.0, 3.0, 300001)
    d2 = spec.d2g(v)
    assert np.all(np.isfinite(d2))
    width = spec.v_hi - spec.v_lo
    # max |S''| = 60 t(1-t)(1-2t) 在 t = (3 - sqrt 3)/6 处取到 10/sqrt 3
    assert np.max(np.abs(d2)) == pytest.approx(10.0 / np.sqrt(3.0) * spec.g_max / width ** 2, rel=1e-6)
    assert np.all(d2[(v <= spec.v_lo) | (v >= spec.v_hi)] == 0.0)
    # 端点处连续: g 属于 C^2
    assert np.max(np.abs(np.diff(d2))) < 1e-3

    inner = np.linspace(0.6, 1.9, 27)
    h = 1e-6
    fd = (spec.dg(inner + h) - spec.dg(inner - h)) / (2 * h)
    np.testing.assert_allclose(spec.d2g(inner), fd, atol=1e-6)


@pytest.mark.parametrize("kwargs", [{"alpha": -1.0}, {"v_lo": 2.0, "v_hi": 1.0},
                                    {"v_lo": 0.0}, {"s_hi": 0.0}, {"g_max": -1.0}])
def test_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        InteractionSpec(**kwargs)


def test_potential_zero_when_decoupled(domain, rng):
    v = ScalarField(domain, np.ones(domain.shape), "none")
    psi = ComplexField(domain, rng.normal(size=domain.shape))
    G = potential_G(default_interaction(0.0), v, psi)
    assert not np.any(G.values)


def test_potential_values(domain):
    spec = default_interaction(0.5)
    v = ScalarField(domain, np.full(domain.shape, 1.25), "none")
    psi = ComplexField(domain, np.full(domain.shape, 1.0 + 1.0j))
    G = potential_G(spec, v, psi)
    np.testing.assert_allclose(G.values, 0.5 * spec.g(1.25) * spec.dh(2.0))


def test_force_vanishes_outside_support_and_in_vacuum(domain):
    spec = default_interaction(1.0)
    rho = np.full(domain.shape, 1.0)
    rho[:5] = 0.0          # vacuum
    rho[5:10] = 4.0        # 1/rho = 0.25 < v_lo
    rho[10:15] = 0.25      # 1/rho = 4 > v_hi
    J = np.ones(domain.shape)
    wsq = np.full(domain.shape, 1.0)
    with np.errstate(all="raise"):
        f = force_potential(spec, ScalarField(domain, rho), J, wsq)
    assert not np.any(f.values[:15])
    expected = spec.dg(1.0) * spec.h(1.0)
    np.testing.assert_allclose(f.values[15:], expected)


def test_force_scales_with_jacobian(domain):
    spec = default_interaction(2.0)
    rho = ScalarField(domain, np.full(domain.shape, 0.8))
    wsq = np.full(domain.shape, 0.5)
    f1 = force_potential(spec, rho, np.ones(domain.shape), wsq)
    f2 = force_potential(spec, rho, np.full(domain.shape, 3.0), wsq)
    np.testing.assert_allclose(f2.values, 3.0 * f1.values)
