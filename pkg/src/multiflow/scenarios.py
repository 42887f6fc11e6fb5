"""Built-in initial data.

Each builder returns a valid, constrained :class:`FlowState`.  Amplitudes
have defaults and can be overridden through keyword parameters (the
``[params]`` table of a config file).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .algebroid import project_constraint
from .dynamics import FlowState
from .errors import ConfigError
from .spectral import Grid
from .state import MultiDensity, QuadratureSet, validate


def _state(grid: Grid, quad: QuadratureSet, rho: np.ndarray, v_raw: np.ndarray) -> FlowState:
    dens = MultiDensity(grid, quad, rho)
    vel = project_constraint(v_raw, dens)
    state = FlowState(0.0, dens, vel)
    validate(state.u).raise_if_failed(ConfigError)
    return state


def _unit_quad(grid: Grid, rho: np.ndarray) -> QuadratureSet:
    return QuadratureSet.unit(np.asarray(grid.integrate(rho)))


def taylor_green(grid: Grid, amplitude: float = 1.0) -> FlowState:
    """Single phase, ``u = A (sin x cos y, -cos x sin y)``: a steady Euler flow."""
    X, Y = grid.coords
    rho = np.ones((1, *grid.shape))
    u = amplitude * np.stack([np.sin(X) * np.cos(Y), -np.cos(X) * np.sin(Y)])[None]
    return _state(grid, _unit_quad(grid, rho), rho, u)


def equal_velocity(grid: Grid, amplitude: float = 1.0, eps: float = 0.3) -> FlowState:
    """Two phases sharing one divergence-free velocity, non-uniform densities."""
    X, Y = grid.coords
    r1 = 0.5 + eps * np.sin(X + Y) * np.cos(Y) + 0.1 * eps * np.cos(2 * X)
    rho = np.stack([r1, 1.0 - r1])
    # stream function psi = sin x sin y + 0.5 cos(x - 2y); u = (dpsi/dy, -dpsi/dx)
    ux = np.sin(X) * np.cos(Y) + np.sin(X - 2 * Y)
    uy = -np.cos(X) * np.sin(Y) + 0.5 * np.sin(X - 2 * Y)
    u = amplitude * np.stack([ux, uy])
    return _state(grid, _unit_quad(grid, rho), rho, np.stack([u, u]))


def two_phase_shear(
    grid: Grid,
    background: float = 3.0,
    shear: float = 0.03,
    eps: float = 0.2,
) -> FlowState:
    """Smoothed counter-shear ``+-shear (cos y, 0)`` riding on a common vortical flow.

    The relative velocity is kept small: homogenized vortex sheets amplify
    short waves at a rate proportional to the velocity jump, while the
    background flow supplies fast, well-resolved nonlinear dynamics.
    """
    if grid.dim != 2:
        raise ConfigError("two_phase_shear is a 2D scenario")
    X, Y = grid.coords
    r1 = 0.5 + eps * np.sin(Y) + 0.25 * eps * np.cos(X) * np.sin(Y)
    rho = np.stack([r1, 1.0 - r1])
    common = background * np.stack(
        [np.sin(X) * np.cos(Y) + 0.5 * np.sin(2 * Y), -np.cos(X) * np.sin(Y) + 0.4 * np.cos(X)]
    )
    rel = shear * np.stack([np.cos(Y), np.zeros_like(Y)])
    return _state(grid, _unit_quad(grid, rho), rho, np.stack([common + rel, common - rel]))


def one_d_two_phase(grid: Grid, amplitude: float = 0.2, eps: float = 0.2) -> FlowState:
    """1D pair ``u = (A sin x, -A sin x)`` (projected), ``rho = (1/2 + eps cos x, 1/2 - eps cos x)``."""
    if grid.dim != 1:
        raise ConfigError("one_d_two_phase is a 1D scenario")
    (X,) = grid.coords
    rho = np.stack([0.5 + eps * np.cos(X), 0.5 - eps * np.cos(X)])
    u = amplitude * np.stack([np.sin(X), -np.sin(X)])[:, None]
    return _state(grid, _unit_quad(grid, rho), rho, u)


def continuum(grid: Grid, m: int = 8, eps: float = 0.3, amplitude: float = 0.5) -> FlowState:
    """Phases labelled by ``a`` in [0, 1], trapezoid weights, ``m`` nodes.

    ``rho_a = 1 + eps cos(pi a) cos x``; the trapezoid sum of ``cos(pi a)``
    vanishes by symmetry, so the weighted sum is one.  The velocity profile
    varies smoothly with the label.
    """
    if m < 2:
        raise ConfigError("continuum needs at least two quadrature nodes")
    a = QuadratureSet.trapezoid_nodes(m)
    coords = grid.coords
    X = coords[0]
    shape_a = (m,) + (1,) * grid.dim
    ca = np.cos(np.pi * a).reshape(shape_a)
    rho = 1.0 + eps * ca * np.cos(X)[None]
    s = (a - 0.5).reshape(shape_a)
    if grid.dim == 1:
        v = amplitude * (s * np.sin(X) + 0.2 * np.cos(2 * X) * s**2)[:, None]
    else:
        Y = coords[1]
        vx = np.cos(Y) + s * np.sin(X) * np.cos(Y) + 0.5 * s**2 * np.cos(X)
        vy = -s * np.cos(X) * np.sin(Y) + 0.3 * np.sin(X)
        v = amplitude * np.stack([vx, vy], axis=1)
    masses = np.asarray(grid.integrate(rho))
    quad = QuadratureSet.trapezoid(masses)
    rho = rho / quad.wsum(rho)  # exact symmetry up to round-off
    quad = QuadratureSet(quad.weights, np.asarray(grid.integrate(rho)), quad.labels)
    return _state(grid, quad, rho, v)


def potential(grid: Grid, amplitude: float = 0.1, eps: float = 0.25, n: int = 2) -> FlowState:
    """Every phase velocity is a gradient (then projected, which keeps it one)."""
    coords = grid.coords
    X = coords[0]
    Y = coords[1] if grid.dim == 2 else 0.0 * X
    phis, rhos = [], []
    for i in range(n):
        phase = 2.0 * math.pi * i / n
        phis.append(np.sin(X + phase) * np.cos(Y) + 0.5 * np.cos(2 * Y + X - phase))
        rhos.append(eps * np.cos(X + Y + phase))
    rho = 1.0 + np.stack(rhos) - np.mean(rhos, axis=0)
    rho = rho / n
    v = amplitude * grid.grad(np.stack(phis))
    return _state(grid, _unit_quad(grid, rho), rho, v)


SCENARIOS: dict[str, Callable[..., FlowState]] = {
    "taylor_green": taylor_green,
    "equal_velocity": equal_velocity,
    "two_phase_shear": two_phase_shear,
    "one_d_two_phase": one_d_two_phase,
    "continuum": continuum,
    "potential": potential,
}

#: (allowed dims, phase count or None when configurable, weights mode)
SCENARIO_SHAPE = {
    "taylor_green": ({2}, 1, "unit"),
    "equal_velocity": ({2}, 2, "unit"),
    "two_phase_shear": ({2}, 2, "unit"),
    "one_d_two_phase": ({1}, 2, "unit"),
    "continuum": ({1, 2}, None, "trapezoid"),
    "potential": ({1, 2}, None, "unit"),
}
