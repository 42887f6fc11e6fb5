"""Randomized and refinement suites shared by the CLI and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import algebroid as alg
from .dynamics import FlowState, Trajectory, consistency_residual, n_steps
from .sampling import random_density, random_field, random_functions, random_velocity
from .spectral import Grid
from .state import DualCotangent, MultiVelocity, QuadratureSet, normalize_coset, normalize_dual_cotangent

LEIBNIZ_STEPS = (1e-3, 5e-4, 2.5e-4)


@dataclass
class SuiteResult:
    """Named residuals with tolerances; ``passed`` when every residual is within its tolerance."""

    title: str
    rows: list = field(default_factory=list)

    def add(self, name: str, value: float, tol: float | None, kind: str = "max") -> None:
        ok = True if tol is None else bool(np.isfinite(value) and (value <= tol if kind == "max" else value >= tol))
        self.rows.append((name, float(value), tol, kind, ok))

    @property
    def passed(self) -> bool:
        return all(r[4] for r in self.rows)

    def lines(self) -> list[str]:
        out = [self.title]
        for name, value, tol, kind, ok in self.rows:
            if tol is None:
                out.append(f"  {name:<34} {value:.3e}  (reported)")
            else:
                rel = "<=" if kind == "max" else ">="
                out.append(f"  {name:<34} {value:.3e}  {rel} {tol:.1e}  {'PASS' if ok else 'FAIL'}")
        return out


def _random_setting(rng: np.random.Generator, grid: Grid, n: int, K: int):
    rho = random_density(grid, np.ones(n), rng, K=K)
    a = normalize_coset(random_velocity(grid, n, rng, K=K), rho)

    def cot():
        v = alg.project_constraint(random_velocity(grid, n, rng, K=K), rho)
        return DualCotangent(v, normalize_dual_cotangent(random_functions(grid, n, rng, K=K), grid))

    return rho, a, cot


def bracket_suite(seed: int = 0, cases: int = 50, N: int = 32, K: int = 2) -> SuiteResult:
    """Antisymmetry, bilinearity, equivalence of the two tensor formulas, duality and Leibniz."""
    rng = np.random.default_rng(seed)
    res = SuiteResult(f"algebroid suite (seed={seed}, cases={cases}, N={N})")
    anti = bil = lie = dual = 0.0
    for c in range(cases):
        dim = 1 + c % 2
        n = 1 + (c // 2) % 3
        grid = Grid(dim, N)
        rho, a, cot = _random_setting(rng, grid, n, K)
        x, y, z = cot(), cot(), cot()
        pxy = alg.poisson_tensor(a, x, y)
        scale = max(1.0, abs(pxy))
        anti = max(anti, abs(pxy + alg.poisson_tensor(a, y, x)) / scale)
        s, t = rng.standard_normal(2)
        comb = DualCotangent(
            MultiVelocity(grid, rho.quad, s * y.v.u + t * z.v.u, rho), s * y.f + t * z.f
        )
        lin = s * pxy + t * alg.poisson_tensor(a, x, z)
        bil = max(bil, abs(alg.poisson_tensor(a, x, comb) - lin) / max(1.0, abs(lin)))
        lie = max(lie, abs(pxy - alg.poisson_tensor_lie_form(a, x, y)) / scale)
        dual = max(dual, abs(alg.cotangent_pairing(y, alg.hamiltonian_operator(a, x)) - pxy) / scale)
    res.add("antisymmetry", anti, 1e-12)
    res.add("bilinearity", bil, 1e-12)
    res.add("two formulas agree", lie, 1e-10)
    res.add("operator/tensor duality", dual, 1e-10)

    orders, cons = leibniz_study(rng, Grid(2, N), n=2, K=K)
    res.add("Leibniz residual h=1e-3", orders["residuals"][0], None)
    res.add("Leibniz residual h=2.5e-4", orders["residuals"][-1], None)
    res.add("Leibniz observed order (min)", min(orders["orders"]), 0.9, kind="min")
    res.add("bracket constraint residual", cons, 1e-8)
    res.add("Jacobi residual", orders["jacobi"], None)
    return res


def leibniz_study(rng: np.random.Generator, grid: Grid, n: int = 2, K: int = 2, steps=LEIBNIZ_STEPS):
    """Leibniz residuals at the given FD steps, observed orders and bracket constraint residual."""
    rho = random_density(grid, np.ones(n), rng, K=K)
    U = alg.projected_constant(random_velocity(grid, n, rng, K=K))
    V = alg.density_weighted(random_velocity(grid, n, rng, K=K))
    phi = random_field(grid, rng, K)
    resid = [alg.leibniz_residual(U, V, phi, rho, h) for h in steps]
    orders = [float(np.log2(resid[i] / resid[i + 1])) for i in range(len(resid) - 1)]
    cons = max(alg.bracket_sections(U, V, rho, h).constraint_residual for h in steps)
    W = alg.potential_section(random_functions(grid, n, rng, K=K), grid)
    jac = alg.jacobi_residual(U, V, W, rho)
    return {"residuals": resid, "orders": orders, "jacobi": jac}, cons


def consistency_suite(seed: int = 0, cases: int = 20, N: int = 32, K: int = 3) -> SuiteResult:
    """Coset form against the normalized velocity form on random constrained states."""
    rng = np.random.default_rng(seed)
    res = SuiteResult(f"Hamiltonian consistency (seed={seed}, cases={cases}, N={N})")
    for label, weights in (("n=1", np.ones(1)), ("n=2", np.ones(2)), ("n=4", np.ones(4)), ("continuum m=8", None)):
        worst_a = worst_r = 0.0
        for _ in range(cases):
            grid = Grid(2, N)
            if weights is None:
                w = QuadratureSet.trapezoid(np.ones(8)).weights
            else:
                w = weights
            rho = random_density(grid, w, rng, K=K)
            u = alg.project_constraint(random_velocity(grid, rho.n, rng, K=K), rho)
            ra, rr = consistency_residual(FlowState(0.0, rho, u))
            worst_a, worst_r = max(worst_a, ra), max(worst_r, rr)
        res.add(f"{label}: coset residual", worst_a, 1e-8)
        res.add(f"{label}: density residual", worst_r, 1e-10)
    return res


def run_to(state: FlowState, T: float, dt: float, track_vorticity: bool = False) -> Trajectory:
    traj = Trajectory(state, track_vorticity=track_vorticity)
    for _ in range(n_steps(T, dt)):
        traj.step(dt)
    return traj


def dt_convergence(state: FlowState, T: float, dt: float, levels: int = 3) -> dict:
    """Errors against a dt/8 (or finer) reference and observed orders per halving."""
    dts = [dt / 2**k for k in range(levels)]
    ref = run_to(state, T, dts[-1] / 8).state.u.u
    g = state.grid
    errs = [g.norm(run_to(state, T, d).state.u.u - ref) for d in dts]
    ratios = [errs[i] / errs[i + 1] for i in range(levels - 1)]
    return {"dt": dts, "errors": errs, "ratios": ratios, "orders": [float(np.log2(r)) for r in ratios]}


def energy_drift(state: FlowState, T: float, dt: float) -> float:
    traj = run_to(state, T, dt)
    H0 = state.energy()
    return abs(traj.state.energy() - H0) / H0
