import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiflow.errors import NormalFormError, StructureError, ValidationError
from multiflow.sampling import random_density, random_functions, random_velocity
from multiflow.spectral import Grid
from multiflow.state import (
    DualCotangent,
    MomentumCoset,
    MultiDensity,
    MultiVelocity,
    QuadratureSet,
    TangentDensity,
    normalize_coset,
    normalize_dual_cotangent,
    require_normal_coset,
    require_normal_functions,
    validate,
)
from multiflow import algebroid as alg


def test_quadrature_constructors():
    q = QuadratureSet.unit([1.0, 2.0])
    assert np.array_equal(q.weights, [1.0, 1.0]) and q.labels == ("phase1", "phase2")
    t = QuadratureSet.trapezoid(np.ones(5))
    assert t.weights.sum() == pytest.approx(1.0)
    assert t.weights[0] == pytest.approx(0.125)
    with pytest.raises(StructureError):
        QuadratureSet([1.0], [1.0, 2.0])
    with pytest.raises(StructureError):
        QuadratureSet.trapezoid([1.0])


def test_arrays_are_read_only(grid2):
    rho = MultiDensity(grid2, QuadratureSet.unit([grid2.volume]), np.ones((1, *grid2.shape)))
    with pytest.raises(ValueError):
        rho.rho[0, 0, 0] = 2.0


def test_shape_mismatch_is_structure_error(grid2):
    q = QuadratureSet.unit([1.0, 1.0])
    with pytest.raises(StructureError):
        MultiDensity(grid2, q, np.ones((3, *grid2.shape)))
    with pytest.raises(StructureError):
        MultiVelocity(grid2, q, np.zeros((2, 1, *grid2.shape)))


def test_validate_density(grid2, rng):
    rho = random_density(grid2, np.ones(3), rng)
    rep = validate(rho)
    assert rep.passed, rep.summary()
    bad = MultiDensity(grid2, rho.quad, rho.rho * 1.01)
    rep = validate(bad)
    assert not rep.passed and "pointwise_sum" in [c.name for c in rep.failures()]
    with pytest.raises(ValidationError):
        rep.raise_if_failed()


def test_validate_reports_negative_density(grid1):
    (X,) = grid1.coords
    r1 = 0.5 + 0.7 * np.cos(X)
    rho = MultiDensity(grid1, QuadratureSet.unit(grid1.integrate(np.stack([r1, 1 - r1]))), np.stack([r1, 1 - r1]))
    assert not validate(rho)["positivity"].passed


def test_validate_unknown_type():
    with pytest.raises(StructureError):
        validate(3.0)


def test_normalize_coset_is_co_closed_and_idempotent(grid2, rng):
    rho = random_density(grid2, np.ones(2), rng)
    a = normalize_coset(random_velocity(grid2, 2, rng), rho)
    assert a.normal_form_residual() < 1e-12
    b = normalize_coset(a.alpha, rho)
    assert np.max(np.abs(a.alpha - b.alpha)) < 1e-12


def test_normalize_coset_removes_common_gradient(grid2, rng):
    # alpha and alpha + grad(phi) lie in the same coset
    rho = random_density(grid2, np.ones(2), rng)
    alpha = random_velocity(grid2, 2, rng)
    phi = random_functions(grid2, 1, rng)[0]
    a1 = normalize_coset(alpha, rho)
    a2 = normalize_coset(alpha + grid2.grad(phi)[None], rho)
    assert np.max(np.abs(a1.alpha - a2.alpha)) < 1e-12


def test_require_normal_coset(grid2, rng):
    rho = random_density(grid2, np.ones(2), rng)
    raw = MomentumCoset(rho, rho.rho[:, None] * random_velocity(grid2, 2, rng))
    with pytest.raises(NormalFormError):
        require_normal_coset(raw)


def test_dual_normal_form(grid2, rng):
    f = normalize_dual_cotangent(random_functions(grid2, 3, rng) + 5.0)
    assert np.all(f[-1] == 0.0)
    assert np.max(np.abs(grid2.mean(f))) < 1e-14
    require_normal_functions(f, grid2)
    with pytest.raises(NormalFormError):
        require_normal_functions(f + 1.0, grid2)


def test_dual_cotangent_validates(grid2, rng):
    rho = random_density(grid2, np.ones(2), rng)
    v = alg.project_constraint(random_velocity(grid2, 2, rng), rho)
    y = DualCotangent(v, normalize_dual_cotangent(random_functions(grid2, 2, rng), grid2))
    assert validate(y).passed


def test_tangent_validation(grid2, rng):
    rho = random_density(grid2, np.ones(2), rng)
    xi = alg.anchor(alg.project_constraint(random_velocity(grid2, 2, rng), rho), rho)
    assert validate(xi).passed
    off = TangentDensity(grid2, rho.quad, xi.xi + 1e-3)
    assert not validate(off).passed


def test_renormalized_reports_drift(grid2, rng):
    rho = random_density(grid2, np.ones(2), rng)
    scaled = MultiDensity(grid2, rho.quad, rho.rho * (1 + 1e-6))
    fixed, drift = scaled.renormalized()
    assert drift == pytest.approx(1e-6, rel=1e-6)
    assert np.max(np.abs(fixed.total() - 1)) < 1e-15


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_random_density_is_valid(seed, n):
    g = Grid(2, 16)
    rho = random_density(g, np.ones(n), np.random.default_rng(seed))
    assert validate(rho).passed


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_trapezoid_density_is_valid(seed, m):
    g = Grid(1, 32)
    w = QuadratureSet.trapezoid(np.ones(m)).weights
    rho = random_density(g, w, np.random.default_rng(seed))
    assert validate(rho).passed
