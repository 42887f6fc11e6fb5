"""Time evolution of multiphase flows and the diagnostics built on it.

The production right-hand side is the velocity-density system

    du_i/dt   = -(u_i . grad) u_i - grad p,
    drho_i/dt = -div(rho_i u_i),

with the advective term written in rotational form,
``grad(|u_i|^2 / 2) + curl(u_i) perp(u_i)``.  On the grid this form keeps
two identities exact to round-off for any resolution: the weighted kinetic
energy is conserved by the semi-discrete system, and ``curl(u_i)`` obeys
the discrete transport law ``d/dt curl(u_i) = -div(curl(u_i) u_i)``.  The
coset (Hamiltonian) right-hand side is the same expression modulo a common
gradient, so the two formulations agree to round-off as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .algebroid import (
    energy_and_dH,
    energy_of,
    hamiltonian_operator,
    inertia,
    project_constraint,
    require_constrained,
)
from .errors import CFLError, FoldError, PositivityError, StructureError, ValidationError
from .spectral import TWO_PI, Grid
from .state import (
    MomentumCoset,
    MultiDensity,
    MultiVelocity,
    Report,
    TangentDensity,
    normalize_coset,
    require_normal_coset,
    validate,
)

#: advective CFL number dt * max|u| * N / (2 pi)
CFL_LIMIT = 0.5


@dataclass(frozen=True)
class FlowState:
    """Snapshot ``(t, rho, u)`` plus the last pressure computed for it."""

    t: float
    rho: MultiDensity
    u: MultiVelocity
    p: np.ndarray | None = None

    def __post_init__(self):
        if self.u.grid != self.rho.grid:
            raise StructureError("velocity and density live on different grids")
        if self.u.rho is not self.rho:
            object.__setattr__(self, "u", MultiVelocity(self.rho.grid, self.rho.quad, self.u.u, self.rho))

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def n(self) -> int:
        return self.rho.n

    @classmethod
    def from_arrays(cls, grid: Grid, quad, rho: np.ndarray, u: np.ndarray, t: float = 0.0) -> "FlowState":
        dens = MultiDensity(grid, quad, rho)
        return cls(t, dens, MultiVelocity(grid, quad, u, dens))

    def validate(self) -> Report:
        return validate(self.u)

    def energy(self) -> float:
        return energy_of(self.u, self.rho)


# -- right-hand sides -------------------------------------------------------


def _advection(u: np.ndarray, grid: Grid) -> np.ndarray:
    """``(u . grad) u`` in rotational form, phase by phase."""
    acc = grid.grad(0.5 * np.sum(u * u, axis=-grid.dim - 1))
    if grid.dim == 2:
        acc = acc + grid.curl(u)[..., None, :, :] * grid.perp(u)
    return acc


def _fluxes(u: np.ndarray, rho: np.ndarray, grid: Grid):
    flux = rho[:, None] * u
    return flux, grid.div(flux)


def _pressure(u: np.ndarray, rho: np.ndarray, weights: np.ndarray, grid: Grid, adv=None, divflux=None) -> np.ndarray:
    if adv is None:
        adv = _advection(u, grid)
    if divflux is None:
        divflux = _fluxes(u, rho, grid)[1]
    src = np.tensordot(weights, rho[:, None] * adv + divflux[:, None] * u, axes=1)
    return grid.solve_poisson(-grid.div(src))


def pressure_solve(u: MultiVelocity, rho: MultiDensity) -> np.ndarray:
    """Mean-zero ``p`` with ``-lap p = div sum_i w_i (rho_i (u_i . grad) u_i + div(rho_i u_i) u_i)``."""
    require_constrained(u, rho)
    return _pressure(u.u, rho.rho, rho.quad.weights, rho.grid)


def _rhs(u: np.ndarray, rho: np.ndarray, weights: np.ndarray, grid: Grid):
    adv = _advection(u, grid)
    _, divflux = _fluxes(u, rho, grid)
    p = _pressure(u, rho, weights, grid, adv, divflux)
    return -adv - grid.grad(p)[None], -divflux, p


def rhs_velocity(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """``(du/dt, drho/dt)`` of the velocity-density system."""
    require_constrained(state.u, state.rho)
    du, drho, _ = _rhs(state.u.u, state.rho.rho, state.rho.quad.weights, state.grid)
    return du, drho


def rhs_coset(a: MomentumCoset) -> tuple[MomentumCoset, TangentDensity]:
    """Hamiltonian vector field of the kinetic energy on the dual bundle."""
    require_normal_coset(a)
    _, dH = energy_and_dH(a)
    return hamiltonian_operator(a, dH)


def consistency_residual(state: FlowState) -> tuple[float, float]:
    """Mismatch between the coset form and the normalized velocity form.

    Returns ``(coset residual, density residual)``, both L2 norms scaled by
    the size of the coset-form derivative.
    """
    rho = state.rho
    g = state.grid
    a = inertia(state.u, rho)
    da, dxi = rhs_coset(a)
    du, drho = rhs_velocity(state)
    da_vel = normalize_coset(du, rho)
    scale = max(1.0, g.norm(da.alpha))
    r_a = g.norm(da_vel.alpha - da.alpha) / scale
    r_rho = g.norm(drho - dxi.xi) / max(1.0, g.norm(dxi.xi))
    return r_a, r_rho


# -- time stepping ----------------------------------------------------------


@dataclass(frozen=True)
class StepInfo:
    """What one step did to the constraints (before enforcement) and the stage velocities."""

    dt: float
    sum_drift: float
    div_after: float
    stages: tuple[np.ndarray, ...] = ()


def max_speed(u: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.max(np.sum(u * u, axis=-grid.dim - 1))))


def cfl_number(state: FlowState, dt: float) -> float:
    return dt * max_speed(state.u.u, state.grid) * state.grid.n / TWO_PI


def _check_step(state: FlowState, dt: float) -> None:
    if not (dt > 0 and math.isfinite(dt)):
        raise ValidationError(f"time step must be positive, got dt={dt}")
    c = cfl_number(state, dt)
    if c > CFL_LIMIT:
        raise CFLError(f"CFL number {c:.3f} exceeds {CFL_LIMIT} at t={state.t:.6g} (dt={dt:.3e})")


def _advance(state: FlowState, dt: float, k1=None):
    """One classical RK4 step followed by renormalization and re-projection."""
    g, w = state.grid, state.rho.quad.weights
    u0, r0 = state.u.u, state.rho.rho
    if k1 is None:
        k1 = _rhs(u0, r0, w, g)
    u2, r2 = u0 + 0.5 * dt * k1[0], r0 + 0.5 * dt * k1[1]
    k2 = _rhs(u2, r2, w, g)
    u3, r3 = u0 + 0.5 * dt * k2[0], r0 + 0.5 * dt * k2[1]
    k3 = _rhs(u3, r3, w, g)
    u4, r4 = u0 + dt * k3[0], r0 + dt * k3[1]
    k4 = _rhs(u4, r4, w, g)
    u_new = u0 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    r_new = r0 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    t_new = state.t + dt
    if not np.all(np.isfinite(u_new)) or not np.all(np.isfinite(r_new)):
        raise PositivityError(f"non-finite values at t={t_new:.6g}", t=t_new)
    dens, drift = MultiDensity(g, state.rho.quad, r_new).renormalized()
    if not np.all(dens.rho > 0):
        raise PositivityError(
            f"phase density lost positivity at t={t_new:.6g} (min {float(r_new.min()):.3e})", t=t_new
        )
    vel = project_constraint(u_new, dens)
    new = FlowState(t_new, dens, vel, k1[2])
    info = StepInfo(dt, drift, vel.constraint_residual(), (u0, u2, u3, u4))
    return new, info


def step_rk4(state: FlowState, dt: float) -> FlowState:
    """Advance by ``dt`` with classical RK4; constraints are re-imposed after the step."""
    _check_step(state, dt)
    return _advance(state, dt)[0]


def step_rk4_info(state: FlowState, dt: float, k1=None) -> tuple[FlowState, StepInfo]:
    """Like :func:`step_rk4` but also return constraint drift and stage velocities."""
    _check_step(state, dt)
    return _advance(state, dt, k1)


def n_steps(T: float, dt: float) -> int:
    if not (T > 0 and dt > 0):
        raise ValidationError(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
    m = int(round(T / dt))
    if m < 1 or abs(m * dt - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"T={T} is not an integer multiple of dt={dt}")
    return m


# -- trajectory driver with vorticity co-evolution --------------------------


def _vorticity_rhs(om: np.ndarray, u: np.ndarray, grid: Grid) -> np.ndarray:
    return -grid.div(om[:, None] * u)


class Trajectory:
    """Single-writer time loop producing immutable :class:`FlowState` snapshots.

    In 2D it also advances passive vorticity fields ``om_tilde`` by
    ``d om/dt = -div(om u_i)``.  They use their own RK4 with the velocity
    between step endpoints taken from cubic Hermite interpolation in time,
    so ``om_tilde - curl(u)`` measures the time-discretization error of the
    transport law rather than vanishing identically.
    """

    def __init__(self, state: FlowState, track_vorticity: bool = True):
        self.state = state
        self.grid = state.grid
        self.track = track_vorticity and self.grid.dim == 2
        self._k1 = _rhs(state.u.u, state.rho.rho, state.rho.quad.weights, self.grid)
        self.state = replace(state, p=self._k1[2])
        if self.track:
            self.om0 = self.grid.curl(state.u.u)
            self.om_tilde = self.om0.copy()
        self.max_sum_drift = 0.0
        self.max_div = state.u.constraint_residual()
        self.max_curl = self._curl_norms().max() if self.track else 0.0

    def _curl_norms(self) -> np.ndarray:
        if self.grid.dim != 2:
            return np.zeros(self.state.n)
        om = self.grid.curl(self.state.u.u)
        return np.sqrt(np.sum(om * om, axis=(-2, -1)) * self.grid.cell_volume)

    def step(self, dt: float) -> StepInfo:
        old, k1_old = self.state, self._k1
        new, info = step_rk4_info(old, dt, k1_old)
        g, w = self.grid, new.rho.quad.weights
        self._k1 = _rhs(new.u.u, new.rho.rho, w, g)
        if self.track:
            ua, ub = old.u.u, new.u.u
            um = 0.5 * (ua + ub) + dt / 8.0 * (k1_old[0] - self._k1[0])
            om = self.om_tilde
            a1 = _vorticity_rhs(om, ua, g)
            a2 = _vorticity_rhs(om + 0.5 * dt * a1, um, g)
            a3 = _vorticity_rhs(om + 0.5 * dt * a2, um, g)
            a4 = _vorticity_rhs(om + dt * a3, ub, g)
            self.om_tilde = om + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        self.state = new
        self.max_sum_drift = max(self.max_sum_drift, info.sum_drift)
        self.max_div = max(self.max_div, info.div_after)
        if self.track:
            self.max_curl = max(self.max_curl, float(self._curl_norms().max()))
        return info

    def kelvin_errors(self) -> np.ndarray:
        """Per-phase ``||om_tilde - curl u||_2 / ||curl u(0)||_2`` (absolute when the denominator is zero)."""
        if not self.track:
            return np.zeros(self.state.n)
        g = self.grid
        diff = self.om_tilde - g.curl(self.state.u.u)
        num = np.sqrt(np.sum(diff * diff, axis=(-2, -1)) * g.cell_volume)
        den = np.sqrt(np.sum(self.om0 * self.om0, axis=(-2, -1)) * g.cell_volume)
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), num)


# -- diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    H: float
    masses: tuple[float, ...]
    constraint_inf: float
    div_l2: float
    kelvin: tuple[float, ...]
    enstrophy: tuple[float, ...]

    @staticmethod
    def header(n: int) -> list[str]:
        return (
            ["t", "H"]
            + [f"mass_{i + 1}" for i in range(n)]
            + ["constraint_inf", "div_l2"]
            + [f"kelvin_{i + 1}" for i in range(n)]
            + [f"enstrophy_{i + 1}" for i in range(n)]
        )

    def values(self) -> list[float]:
        return [self.t, self.H, *self.masses, self.constraint_inf, self.div_l2, *self.kelvin, *self.enstrophy]


def diagnostics(state: FlowState, kelvin: np.ndarray | None = None) -> DiagnosticsRow:
    g = state.grid
    rho = state.rho
    if g.dim == 2:
        om = g.curl(state.u.u)
        ens = np.sqrt(np.sum(om * om, axis=(-2, -1)) * g.cell_volume)
    else:
        ens = np.zeros(rho.n)
    kel = np.zeros(rho.n) if kelvin is None else np.asarray(kelvin, dtype=float)
    row = DiagnosticsRow(
        t=float(state.t),
        H=state.energy(),
        masses=tuple(float(m) for m in rho.masses()),
        constraint_inf=float(np.max(np.abs(rho.total() - 1.0))),
        div_l2=state.u.constraint_residual(),
        kelvin=tuple(float(k) for k in kel),
        enstrophy=tuple(float(e) for e in ens),
    )
    return row


# -- Kelvin check -----------------------------------------------------------


@dataclass(frozen=True)
class KelvinReport:
    errors: np.ndarray
    max_curl: float
    final: FlowState


def kelvin_check(initial: FlowState, T: float, dt: float) -> KelvinReport:
    """Co-evolve each phase's vorticity and compare with ``curl u_i(T)``."""
    if initial.grid.dim != 2:
        raise ValidationError("Kelvin check needs 2D data (vorticity vanishes identically in 1D)")
    validate(initial.u).raise_if_failed()
    traj = Trajectory(initial, track_vorticity=True)
    for _ in range(n_steps(T, dt)):
        traj.step(dt)
    return KelvinReport(traj.kelvin_errors(), traj.max_curl, traj.state)


# -- induced metric on multiphase densities ---------------------------------


def mdens_metric(xi: TangentDensity, rho: MultiDensity) -> tuple[float, np.ndarray]:
    """Tangent norm induced on densities: ``sum_i w_i int |grad f_i|^2 rho_i`` with ``div(rho_i grad f_i) = -xi_i``."""
    validate(xi).raise_if_failed()
    g = rho.grid
    pots = np.stack([g.solve_weighted_poisson(rho.rho[i], -xi.xi[i]) for i in range(rho.n)])
    grad = g.grad(pots)
    val = float(rho.quad.weights @ np.asarray(g.integrate(np.sum(grad * grad, axis=-g.dim - 1) * rho.rho)))
    return val, pots


# -- 1D flow maps and pushforward -------------------------------------------


@dataclass(frozen=True)
class PushforwardReport:
    mismatch: np.ndarray
    final: FlowState
    min_jacobian: float


def _inverse_map(grid: Grid, disp: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``x + disp(x) = y`` for a monotone circle map given its periodic displacement samples.

    Starts from monotone cubic interpolation of the inverse and polishes with
    Newton steps on the trigonometric interpolant of the displacement.
    Returns ``(x, phi'(x))``.
    """
    n = grid.n
    x0 = np.arange(n) * grid.dx
    phi = x0 + disp
    jac_nodes = 1.0 + grid.grad(disp)[0]
    if np.any(np.diff(phi) <= 0) or phi[0] + TWO_PI <= phi[-1] or np.any(jac_nodes <= 0):
        raise FoldError("flow map is not monotone (fold)")
    ext_phi = np.concatenate([phi[-3:] - TWO_PI, phi, phi[:3] + TWO_PI])
    ext_x = np.concatenate([x0[-3:] - TWO_PI, x0, x0[:3] + TWO_PI])
    shift = np.floor((y - phi[0]) / TWO_PI)
    yy = y - shift * TWO_PI
    x = PchipInterpolator(ext_phi, ext_x)(yy)
    ddisp = grid.grad(disp)[0]
    for _ in range(30):
        d_at = grid.evaluate(disp, x)
        jac = 1.0 + grid.evaluate(ddisp, x)
        if np.any(jac <= 0):
            raise FoldError("flow map Jacobian vanished during inversion")
        step = (x + d_at - yy) / jac
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    jac = 1.0 + grid.evaluate(ddisp, x)
    return x + shift * TWO_PI, jac


def pushforward_check_1d(initial: FlowState, T: float, dt: float) -> PushforwardReport:
    """Compare PDE densities at ``T`` with pushforwards of the initial ones along each phase's flow map."""
    g = initial.grid
    if g.dim != 1:
        raise ValidationError("pushforward check is implemented for 1D states only")
    validate(initial.u).raise_if_failed()
    n = initial.n
    x0 = np.arange(g.n) * g.dx
    disp = np.zeros((n, g.n))
    state = initial
    k1 = None
    for _ in range(n_steps(T, dt)):
        new, info = step_rk4_info(state, dt, k1)
        ua, u2, u3, u4 = (s[:, 0] for s in info.stages)
        for i in range(n):
            d = disp[i]
            b1 = g.evaluate(ua[i], x0 + d)
            b2 = g.evaluate(u2[i], x0 + d + 0.5 * dt * b1)
            b3 = g.evaluate(u3[i], x0 + d + 0.5 * dt * b2)
            b4 = g.evaluate(u4[i], x0 + d + dt * b3)
            disp[i] = d + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        state = new
        k1 = None
    mismatch = np.zeros(n)
    min_jac = np.inf
    for i in range(n):
        xs, jac = _inverse_map(g, disp[i], x0)
        pushed = g.evaluate(initial.rho.rho[i], xs) / jac
        mismatch[i] = float(np.max(np.abs(pushed - state.rho.rho[i])))
        min_jac = min(min_jac, float(jac.min()))
    return PushforwardReport(mismatch, state, min_jac)
