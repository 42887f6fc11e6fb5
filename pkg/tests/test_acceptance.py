"""Acceptance criteria 1-12.

Each test records one ``criterion K: PASS|FAIL`` line (echoed in the pytest
terminal summary and printed directly when run with ``-s``) and then asserts
the same condition.  Run standalone with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import VorticityEuler2D, smooth_solenoidal
from multiflow import algebroid as alg
from multiflow.dynamics import FlowState, kelvin_check, mdens_metric, pushforward_check_1d
from multiflow.sampling import random_density, random_functions, random_velocity
from multiflow.scenarios import SCENARIO_SHAPE, SCENARIOS, equal_velocity, one_d_two_phase, taylor_green, two_phase_shear
from multiflow.spectral import Grid
from multiflow.state import MultiVelocity, QuadratureSet
from multiflow.suites import bracket_suite, consistency_suite, leibniz_study, run_to

# tolerances pinned by the acceptance list
TG_DRIFT_TOL, TG_SECONDS = 1e-6, 60.0
ENERGY_RATIO, ENERGY_RATIO_REL, ENERGY_ABS_TOL = 16.0, 0.25, 1e-6
MASS_TOL = 1e-11
SUM_DRIFT_TOL, DIV_TOL = 1e-10, 1e-8
CONSISTENCY_TOL = 1e-8
KELVIN_RATIO = (12.0, 20.0)
CURL_TOL = 1e-8
SUBMERSION_TOL = 1e-10
PUSHFORWARD_TOL = 1e-4
REDUCTION_TOL = 1e-9
ELLIPTIC_TOL = 1e-10

DT = 1e-3
T_FINAL = 1.0


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _scenario_cases():
    for name in sorted(SCENARIOS):
        for dim in sorted(SCENARIO_SHAPE[name][0]):
            yield name, dim


@lru_cache(maxsize=None)
def scenario_run(name: str, dim: int):
    grid = Grid(dim, 64 if dim == 2 else 256)
    initial = SCENARIOS[name](grid)
    traj = run_to(initial, T_FINAL, DT, track_vorticity=dim == 2)
    return initial, traj


@lru_cache(maxsize=None)
def shear_energy_drift(dt: float):
    initial = two_phase_shear(Grid(2, 64))
    traj = run_to(initial, T_FINAL, dt)
    H0 = initial.energy()
    return abs(traj.state.energy() - H0) / H0, traj


def test_criterion_01_taylor_green_stationarity():
    start = time.perf_counter()
    initial = taylor_green(Grid(2, 64))
    final = run_to(initial, T_FINAL, DT).state
    seconds = time.perf_counter() - start
    drift = float(np.max(np.abs(final.u.u - initial.u.u)))
    ok = drift <= TG_DRIFT_TOL and seconds <= TG_SECONDS
    record(1, ok, f"max|u(T)-u(0)| = {drift:.3e} (<= {TG_DRIFT_TOL:.0e}), runtime {seconds:.1f} s (<= {TG_SECONDS:.0f} s)")
    assert ok


def test_criterion_02_energy_conservation():
    coarse, _ = shear_energy_drift(1e-3)
    fine, _ = shear_energy_drift(5e-4)
    ratio = coarse / fine if fine > 0 else float("inf")
    lo, hi = ENERGY_RATIO * (1 - ENERGY_RATIO_REL), ENERGY_RATIO * (1 + ENERGY_RATIO_REL)
    ok = lo <= ratio <= hi and fine <= ENERGY_ABS_TOL
    record(
        2, ok,
        f"drift(1e-3) = {coarse:.3e}, drift(5e-4) = {fine:.3e}, ratio {ratio:.2f} in [{lo:.0f}, {hi:.0f}], "
        f"abs drift <= {ENERGY_ABS_TOL:.0e}",
    )
    assert ok


def test_criterion_03_mass_conservation():
    worst, where = 0.0, ""
    for name, dim in _scenario_cases():
        initial, traj = scenario_run(name, dim)
        err = float(np.max(np.abs(traj.state.rho.masses() - initial.rho.quad.masses)))
        if err >= worst:
            worst, where = err, f"{name}/{dim}D"
    ok = worst <= MASS_TOL
    record(3, ok, f"max |int rho_i(T) - c_i| = {worst:.3e} ({where}) <= {MASS_TOL:.0e} over all scenarios at T=1")
    assert ok


def test_criterion_04_constraint_maintenance():
    trajs = [scenario_run(name, dim)[1] for name, dim in _scenario_cases()]
    trajs += [shear_energy_drift(1e-3)[1], shear_energy_drift(5e-4)[1]]
    sum_drift = max(t.max_sum_drift for t in trajs)
    div = max(t.max_div for t in trajs)
    ok = sum_drift <= SUM_DRIFT_TOL and div <= DIV_TOL
    record(
        4, ok,
        f"per-step sum drift {sum_drift:.3e} <= {SUM_DRIFT_TOL:.0e}, post-projection div {div:.3e} <= {DIV_TOL:.0e} "
        f"({len(trajs)} runs)",
    )
    assert ok


def test_criterion_05_hamiltonian_consistency():
    res = consistency_suite(seed=0, cases=20, N=32)
    coset = max(v for name, v, *_ in res.rows if "coset" in name)
    dens = max(v for name, v, *_ in res.rows if "density" in name)
    ok = coset <= CONSISTENCY_TOL and dens <= 1e-10
    record(5, ok, f"coset residual {coset:.3e} <= {CONSISTENCY_TOL:.0e}, density residual {dens:.3e} (n=1,2,4, m=8; 20 states each)")
    assert ok


def test_criterion_06_kelvin_transport():
    initial = two_phase_shear(Grid(2, 64))
    e1 = float(kelvin_check(initial, T_FINAL, 2e-3).errors.max())
    e2 = float(kelvin_check(initial, T_FINAL, 1e-3).errors.max())
    ratio = e1 / e2
    _, traj = scenario_run("potential", 2)
    curl = traj.max_curl
    ok = KELVIN_RATIO[0] <= ratio <= KELVIN_RATIO[1] and curl <= CURL_TOL
    record(
        6, ok,
        f"error(2e-3) = {e1:.3e}, error(1e-3) = {e2:.3e}, ratio {ratio:.2f} in {list(KELVIN_RATIO)}; "
        f"potential max ||curl u_i|| = {curl:.3e} <= {CURL_TOL:.0e}",
    )
    assert ok


def test_criterion_07_poisson_structure():
    res = bracket_suite(seed=0, cases=50, N=32)
    rows = {name: (v, tol, ok) for name, v, tol, _, ok in res.rows}
    keys = ("antisymmetry", "bilinearity", "two formulas agree", "operator/tensor duality")
    ok = all(rows[k][2] for k in keys)
    record(7, ok, ", ".join(f"{k} {rows[k][0]:.2e} <= {rows[k][1]:.0e}" for k in keys) + " (50 cases, seed 0)")
    assert ok


def test_criterion_08_bracket_leibniz():
    rng = np.random.default_rng(0)
    study, _ = leibniz_study(rng, Grid(2, 32), n=2, K=2)
    resid, orders = study["residuals"], study["orders"]
    # bracket constraint residual bounded by O(h^2) + 1e-8 at each step
    grid = Grid(2, 32)
    rho = random_density(grid, np.ones(2), rng, K=2)
    U = alg.projected_constant(random_velocity(grid, 2, rng, K=2))
    V = alg.density_weighted(random_velocity(grid, 2, rng, K=2))
    cons = [alg.bracket_sections(U, V, rho, h).constraint_residual for h in (1e-3, 5e-4, 2.5e-4)]
    cons_ok = all(c <= h * h + 1e-8 for c, h in zip(cons, (1e-3, 5e-4, 2.5e-4)))
    decreasing = all(resid[i + 1] < resid[i] for i in range(len(resid) - 1))
    ok = decreasing and min(orders) >= 0.9 and cons_ok
    record(
        8, ok,
        f"Leibniz residuals {', '.join(f'{r:.2e}' for r in resid)}, observed orders "
        f"{', '.join(f'{o:.2f}' for o in orders)} (>= first order); constraint residual max {max(cons):.2e}",
    )
    assert ok


def test_criterion_09_submersion():
    rng = np.random.default_rng(9)
    grid = Grid(2, 32)
    identity, excess = 0.0, -np.inf
    for _ in range(20):
        rho = random_density(grid, np.ones(2), rng)
        grad = alg.project_constraint(MultiVelocity(grid, rho.quad, grid.grad(random_functions(grid, 2, rng))), rho)
        val, _ = mdens_metric(alg.anchor(grad, rho), rho)
        norm = 2 * alg.energy_of(grad, rho)
        identity = max(identity, abs(val - norm) / max(1.0, norm))
        u = alg.project_constraint(random_velocity(grid, 2, rng), rho)
        val, _ = mdens_metric(alg.anchor(u, rho), rho)
        excess = max(excess, val - 2 * alg.energy_of(u, rho))
    ok = identity <= SUBMERSION_TOL and excess <= SUBMERSION_TOL
    record(9, ok, f"submersion identity {identity:.3e} <= {SUBMERSION_TOL:.0e}; max(metric - ||u||^2) = {excess:.3e} <= {SUBMERSION_TOL:.0e}")
    assert ok


def test_criterion_10_pushforward():
    rep = pushforward_check_1d(one_d_two_phase(Grid(1, 256)), 0.5, 1e-3)
    mismatch = float(rep.mismatch.max())
    ok = mismatch <= PUSHFORWARD_TOL
    record(10, ok, f"max-norm pushforward mismatch {mismatch:.3e} <= {PUSHFORWARD_TOL:.0e} (N=256, dt=1e-3, T=0.5)")
    assert ok


def test_criterion_11_reduction_oracles():
    N, T = 64, 0.1
    grid = Grid(2, N)
    oracle = VorticityEuler2D(N)
    v0 = smooth_solenoidal(N, seed=0)
    v0 /= np.abs(v0).max()
    single = FlowState.from_arrays(grid, QuadratureSet.unit([grid.volume]), np.ones((1, N, N)), v0[None])
    err1 = float(np.max(np.abs(run_to(single, T, DT).state.u.u[0] - oracle.run(v0, T, DT))))
    ev = equal_velocity(grid)
    ref = oracle.run(ev.u.u[0], T, DT)
    err2 = float(np.max(np.abs(run_to(ev, T, DT).state.u.u - ref[None])))
    ok = err1 <= REDUCTION_TOL and err2 <= REDUCTION_TOL
    record(11, ok, f"n=1 vs vorticity solver {err1:.3e}, equal-velocity vs single phase {err2:.3e} (<= {REDUCTION_TOL:.0e})")
    assert ok


def test_criterion_12_elliptic_solvers():
    grid = Grid(2, 64)
    X, Y = grid.coords
    f = np.sin(X) * np.cos(2 * Y) + np.exp(np.cos(X + Y)) + 0.2 * np.sin(3 * X - Y)
    f = f - grid.mean(f)
    e_plain = float(np.max(np.abs(grid.solve_poisson(grid.lap(f)) - f)))
    rho = 0.1 + 0.9 * (0.5 + 0.5 * np.sin(X) * np.cos(Y))
    e_weighted = float(np.max(np.abs(grid.solve_weighted_poisson(rho, grid.div(rho * grid.grad(f))) - f)))
    ok = e_plain <= ELLIPTIC_TOL and e_weighted <= ELLIPTIC_TOL and rho.min() >= 0.1
    record(12, ok, f"Poisson error {e_plain:.3e}, weighted (min rho {rho.min():.2f}) error {e_weighted:.3e} (<= {ELLIPTIC_TOL:.0e})")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
