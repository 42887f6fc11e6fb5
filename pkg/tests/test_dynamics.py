import numpy as np
import pytest
import sympy as sp

from oracles import VorticityEuler2D, smooth_solenoidal
from multiflow import algebroid as alg
from multiflow.dynamics import (
    DiagnosticsRow,
    FlowState,
    Trajectory,
    consistency_residual,
    diagnostics,
    kelvin_check,
    mdens_metric,
    n_steps,
    pressure_solve,
    pushforward_check_1d,
    rhs_velocity,
    step_rk4,
    step_rk4_info,
    _inverse_map,
)
from multiflow.errors import CFLError, FoldError, PositivityError, ValidationError
from multiflow.sampling import random_density, random_functions, random_velocity
from multiflow.scenarios import SCENARIOS, one_d_two_phase, taylor_green, two_phase_shear
from multiflow.spectral import Grid
from multiflow.state import MultiVelocity, QuadratureSet, validate
from multiflow.suites import run_to


def _random_state(grid, rng, n=2):
    rho = random_density(grid, np.ones(n), rng)
    return FlowState(0.0, rho, alg.project_constraint(random_velocity(grid, n, rng), rho))


def test_taylor_green_pressure_symbolic():
    # p solves -lap p = div((u.grad)u); sympy gives +(cos 2x + cos 2y)/4
    x, y = sp.symbols("x y", real=True)
    u = [sp.sin(x) * sp.cos(y), -sp.cos(x) * sp.sin(y)]
    X = (x, y)
    conv = [sum(u[j] * sp.diff(u[i], X[j]) for j in range(2)) for i in range(2)]
    p_ref = (sp.cos(2 * x) + sp.cos(2 * y)) / 4
    assert sp.simplify(sp.diff(p_ref, x) + conv[0]) == 0
    assert sp.simplify(sp.diff(p_ref, y) + conv[1]) == 0
    g = Grid(2, 32)
    s = taylor_green(g)
    Xg, Yg = g.coords
    assert np.max(np.abs(pressure_solve(s.u, s.rho) - (np.cos(2 * Xg) + np.cos(2 * Yg)) / 4)) < 1e-13


def test_taylor_green_is_steady():
    s = taylor_green(Grid(2, 32))
    du, drho = rhs_velocity(s)
    assert np.max(np.abs(du)) < 1e-13 and np.max(np.abs(drho)) < 1e-13


@pytest.mark.parametrize("n", [1, 2, 4])
def test_coset_and_velocity_forms_agree(n, rng):
    ra, rr = consistency_residual(_random_state(Grid(2, 32), rng, n))
    assert ra < 1e-8 and rr < 1e-10


def test_semi_discrete_energy_rate_vanishes(rng):
    # dH/dt = sum w int (rho u.du + |u|^2/2 drho)
    s = _random_state(Grid(2, 32), rng, 3)
    du, drho = rhs_velocity(s)
    g = s.grid
    rate = s.rho.quad.weights @ g.integrate(
        s.rho.rho * np.sum(s.u.u * du, axis=1) + 0.5 * np.sum(s.u.u**2, axis=1) * drho
    )
    assert abs(rate) < 1e-11 * max(1.0, s.energy())


def test_semi_discrete_vorticity_transport(rng):
    s = _random_state(Grid(2, 32), rng, 2)
    du, _ = rhs_velocity(s)
    g = s.grid
    om = g.curl(s.u.u)
    assert np.max(np.abs(g.curl(du) + g.div(om[:, None] * s.u.u))) < 1e-10


def test_step_keeps_constraints(rng):
    s = _random_state(Grid(2, 32), rng, 2)
    new, info = step_rk4_info(s, 1e-3)
    assert info.sum_drift < 1e-10
    assert info.div_after < 1e-8
    assert validate(new.u).passed
    assert np.max(np.abs(new.rho.masses() - s.rho.quad.masses)) < 1e-12
    assert new.t == pytest.approx(1e-3)


def test_cfl_guard():
    s = taylor_green(Grid(2, 32))
    with pytest.raises(CFLError):
        step_rk4(s, 0.5)


def test_positivity_loss_reports_time():
    s = one_d_two_phase(Grid(1, 128), amplitude=1.0, eps=0.45)
    with pytest.raises(PositivityError) as info:
        run_to(s, 3.0, 2e-3)
    assert info.value.t is not None and 0 < info.value.t < 3.0


def test_n_steps_validation():
    assert n_steps(1.0, 0.25) == 4
    with pytest.raises(ValidationError):
        n_steps(1.0, 0.3)
    with pytest.raises(ValidationError):
        n_steps(-1.0, 0.1)


def test_single_phase_matches_vorticity_oracle():
    N = 32
    g = Grid(2, N)
    v0 = smooth_solenoidal(N, seed=3)
    v0 /= np.abs(v0).max()
    s = FlowState.from_arrays(g, QuadratureSet.unit([g.volume]), np.ones((1, N, N)), v0[None])
    ours = run_to(s, 0.05, 1e-3).state.u.u[0]
    ref = VorticityEuler2D(N).run(v0, 0.05, 1e-3)
    assert np.max(np.abs(ours - ref)) < 1e-9


def test_kelvin_error_is_small_and_fourth_order():
    s = two_phase_shear(Grid(2, 32))
    a = kelvin_check(s, 0.2, 4e-3).errors.max()
    b = kelvin_check(s, 0.2, 2e-3).errors.max()
    assert a < 1e-8
    assert 12 <= a / b <= 20


def test_kelvin_check_needs_2d():
    with pytest.raises(ValidationError):
        kelvin_check(one_d_two_phase(Grid(1, 64)), 0.01, 1e-3)


def test_pushforward_short_run():
    rep = pushforward_check_1d(one_d_two_phase(Grid(1, 64)), 0.05, 1e-3)
    assert rep.mismatch.max() < 1e-6
    assert rep.min_jacobian > 0


def test_inverse_map_detects_fold():
    g = Grid(1, 32)
    (X,) = g.coords
    with pytest.raises(FoldError):
        _inverse_map(g, 2.0 * np.sin(X), X)


def test_inverse_map_identity_shift():
    g = Grid(1, 32)
    (X,) = g.coords
    xs, jac = _inverse_map(g, 0.3 * np.ones(g.n), X)
    assert np.max(np.abs(xs - (X - 0.3))) < 1e-13 and np.allclose(jac, 1.0)


def test_metric_of_gradient_anchor(rng):
    # a projected gradient tuple is horizontal, so the induced metric equals its norm
    g = Grid(2, 32)
    rho = random_density(g, np.ones(2), rng)
    u = alg.project_constraint(MultiVelocity(g, rho.quad, g.grad(random_functions(g, 2, rng))), rho)
    val, _ = mdens_metric(alg.anchor(u, rho), rho)
    assert val == pytest.approx(2 * alg.energy_of(u, rho), rel=1e-10)
    v = alg.project_constraint(random_velocity(g, 2, rng), rho)
    val, _ = mdens_metric(alg.anchor(v, rho), rho)
    assert val <= 2 * alg.energy_of(v, rho) + 1e-10


def test_diagnostics_row_layout():
    s = two_phase_shear(Grid(2, 16))
    row = diagnostics(s)
    assert len(row.values()) == len(DiagnosticsRow.header(2)) == 2 + 2 + 2 + 2 + 2
    assert row.H == pytest.approx(s.energy())


def test_trajectory_is_deterministic():
    s = two_phase_shear(Grid(2, 16))
    a, b = Trajectory(s), Trajectory(s)
    for _ in range(5):
        a.step(2e-3)
        b.step(2e-3)
    assert np.array_equal(a.state.u.u, b.state.u.u)
    assert np.array_equal(a.om_tilde, b.om_tilde)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_are_valid(name):
    dim = 2 if name not in ("one_d_two_phase",) else 1
    s = SCENARIOS[name](Grid(dim, 32))
    assert validate(s.u).passed
    ra, rr = consistency_residual(s)
    assert ra < 1e-8 and rr < 1e-10
