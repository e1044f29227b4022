import numpy as np
import pytest

from solver.errors import DomainError, ParameterError, ShapeError
from solver.fields import (MAGNETIC_BCS, ComplexField, ScalarField, VectorField3, apply_bc, curl,
                           divergence, gradient, h1_seminorm, helmholtz_clean, integrate,
                           interpolate, lp_norm)
from solver.geometry import Domain
from tests.conftest import cosine_density, planar_magnetic


def random_magnetic(domain, rng, amp=1.0):
    vals = amp * rng.normal(size=(3,) + domain.shape)
    for i, bc in enumerate(MAGNETIC_BCS):
        vals[i] = apply_bc(vals[i], bc)
    return VectorField3(domain, vals, MAGNETIC_BCS)


def test_integrate_constants_exactly(domain):
    f = ScalarField(domain, np.full(domain.shape, 3.0))
    assert integrate(f) == pytest.approx(3.0 * domain.area, rel=1e-14)
    assert lp_norm(f, 2) == pytest.approx(3.0, rel=1e-14)


def test_lp_norm_rejects_bad_exponent(domain):
    f = ScalarField(domain, np.ones(domain.shape))
    with pytest.raises(ParameterError):
        lp_norm(f, 0.5)


def test_field_shape_checks(domain, small_domain):
    with pytest.raises(ShapeError):
        ScalarField(domain, np.zeros(small_domain.shape))
    with pytest.raises(ShapeError):
        VectorField3(domain, np.zeros((2,) + domain.shape))
    with pytest.raises(ShapeError):
        ComplexField(domain, np.zeros((3, 3)))
    with pytest.raises(ShapeError):
        ScalarField(domain, np.zeros(domain.shape), "periodic")


def test_gradient_second_order():
    errs = []
    for n in (31, 63):
        d = Domain(1.0, 1.0, n, n)
        X, Y = d.mesh()
        f = ScalarField(d, np.sin(np.pi * X) * np.sin(2 * np.pi * Y), "dirichlet0")
        gx, _ = gradient(f)
        exact = np.pi * np.cos(np.pi * X) * np.sin(2 * np.pi * Y)
        errs.append(np.max(np.abs(gx - exact)))
    assert errs[0] / errs[1] > 3.5


def test_h1_seminorm_single_mode():
    d = Domain(1.0, 1.0, 63, 63)
    X, Y = d.mesh()
    f = ScalarField(d, np.sin(np.pi * X) * np.sin(np.pi * Y), "dirichlet0")
    # int |grad f|^2 = pi^2 / 2
    assert h1_seminorm(f) ** 2 == pytest.approx(np.pi ** 2 / 2, rel=2e-3)


def test_helmholtz_clean_removes_divergence_and_keeps_curl(domain, rng):
    H = random_magnetic(domain, rng)
    clean = helmholtz_clean(H)
    div = divergence(clean)
    assert np.max(np.abs(div)) < 1e-9 * np.max(np.abs(divergence(H)))
    np.testing.assert_allclose(curl(clean)[2], curl(H)[2], atol=1e-10)
    np.testing.assert_array_equal(clean.values[2], H.values[2])


def test_helmholtz_clean_is_idempotent(domain, rng):
    once = helmholtz_clean(random_magnetic(domain, rng))
    twice = helmholtz_clean(once)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)


def test_helmholtz_clean_keeps_divergence_free_field(domain):
    H = planar_magnetic(domain, amp=0.3, axial=0.2)
    np.testing.assert_allclose(helmholtz_clean(H).values, H.values, atol=1e-13)


def test_helmholtz_clean_requires_magnetic_tags(domain):
    with pytest.raises(ShapeError):
        helmholtz_clean(VectorField3.zeros(domain))


def test_interpolate_smooth_field(domain, rng):
    f = cosine_density(domain)
    pts = rng.uniform(0.0, 1.0, size=(200, 2))
    exact = 1.0 + 0.5 * np.cos(np.pi * pts[:, 0]) * np.cos(np.pi * pts[:, 1])
    np.testing.assert_allclose(interpolate(f, pts), exact, atol=1e-5)


def test_interpolate_reproduces_nodes(small_domain, rng):
    f = ScalarField(small_domain, rng.normal(size=small_domain.shape), "none")
    np.testing.assert_allclose(interpolate(f, small_domain.points()), f.values, atol=1e-10)


def test_interpolate_rejects_points_outside(domain):
    f = cosine_density(domain)
    with pytest.raises(DomainError):
        interpolate(f, np.array([[0.5, 1.01]]))
