"""The multiphase Lie algebroid over the space of multiphase densities and its dual.

Fiber elements are constrained velocity tuples, dual elements are momentum
cosets in co-closed normal form, and base cotangent vectors are
function-tuple cosets in the "last component zero, all mean-zero" form.
On the flat torus the 2-form ``d(alpha)`` of a 1-form in 2D is
``curl(alpha) dx^dy``, so ``d(alpha)(u, v) = curl(alpha) (u_x v_y - u_y v_x)``
and ``i_u d(alpha) = curl(alpha) perp(u)``; in 1D every 2-form vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConstraintError, StepSizeError, StructureError
from .spectral import Grid
from .state import (
    CONSTRAINT_TOL,
    DualCotangent,
    MomentumCoset,
    MultiDensity,
    MultiVelocity,
    TangentDensity,
    _check_quads,
    normalize_coset,
    normalize_dual_cotangent,
    require_normal_coset,
    require_normal_functions,
)

#: default finite-difference step for derivatives of sections along the base
DEFAULT_FD_STEP = 1e-4


# -- small helpers ----------------------------------------------------------


def _as_velocity_array(v, rho: MultiDensity) -> np.ndarray:
    arr = v.u if isinstance(v, MultiVelocity) else np.asarray(v, dtype=float)
    expect = (rho.n, rho.grid.dim, *rho.grid.shape)
    if arr.shape != expect:
        raise StructureError(f"velocity array has shape {arr.shape}, expected {expect}")
    return arr


def require_constrained(u: MultiVelocity, rho: MultiDensity, tol: float = CONSTRAINT_TOL) -> None:
    """Raise :class:`ConstraintError` unless ``div(sum w rho u)`` vanishes to ``tol`` (relative to the flux size)."""
    _check_quads(u.quad, rho.quad)
    flux = rho.quad.wsum(rho.rho[:, None] * u.u)
    r = rho.grid.norm(rho.grid.div(flux))
    scale = max(1.0, rho.grid.norm(flux))
    if not r <= tol * scale:
        raise ConstraintError(f"velocity tuple violates the divergence constraint: residual {r:.3e}")


def dot(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Pointwise Euclidean product of vector arrays over the component axis."""
    return np.sum(a * b, axis=-grid.dim - 1)


def directional(u: np.ndarray, f: np.ndarray, grid: Grid) -> np.ndarray:
    """``u . grad f`` for scalar tuples ``f``."""
    return dot(u, grid.grad(f), grid)


def advect_vector(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """``(u . grad) v`` componentwise."""
    comp = -grid.dim - 1
    return np.stack(
        [directional(u, np.take(v, j, axis=comp), grid) for j in range(grid.dim)],
        axis=comp,
    )


def lie_bracket(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """Vector-field commutator ``[u, v] = (u . grad) v - (v . grad) u``."""
    return advect_vector(u, v, grid) - advect_vector(v, u, grid)


def two_form(alpha: np.ndarray, u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """``d(alpha)(u, v)`` pointwise; zero in 1D."""
    if grid.dim == 1:
        return np.zeros(u.shape[:-2] + grid.shape)
    om = grid.curl(alpha)
    return om * (u[..., 0, :, :] * v[..., 1, :, :] - u[..., 1, :, :] * v[..., 0, :, :])


def interior_two_form(alpha: np.ndarray, u: np.ndarray, grid: Grid) -> np.ndarray:
    """``i_u d(alpha)`` as a 1-form coefficient array; zero in 1D."""
    if grid.dim == 1:
        return np.zeros_like(u)
    return grid.curl(alpha)[..., None, :, :] * grid.perp(u)


def _weighted_integral(rho: MultiDensity, density: np.ndarray) -> float:
    """``sum_i w_i int density_i rho_i``."""
    return float(rho.quad.weights @ np.asarray(rho.grid.integrate(density * rho.rho)))


# -- anchor and projections -------------------------------------------------


def anchor(u: MultiVelocity, rho: MultiDensity) -> TangentDensity:
    """``xi_i = -div(rho_i u_i)``."""
    require_constrained(u, rho)
    g = rho.grid
    return TangentDensity(g, rho.quad, -g.div(rho.rho[:, None] * u.u))


def anchor_dual(f: np.ndarray, rho: MultiDensity) -> MomentumCoset:
    """Coset of the gradients of a function tuple, in co-closed normal form."""
    g = rho.grid
    f = np.asarray(f, dtype=float)
    if f.shape != (rho.n, *g.shape):
        raise StructureError(f"function tuple has shape {f.shape}")
    require_normal_functions(f, g)
    return normalize_coset(g.grad(f), rho)


def project_constraint(v, rho: MultiDensity) -> MultiVelocity:
    """Remove the common gradient that violates ``div(sum w rho v) = 0``."""
    g = rho.grid
    arr = _as_velocity_array(v, rho)
    flux = rho.quad.wsum(rho.rho[:, None] * arr)
    phi = g.solve_poisson(g.div(flux))
    return MultiVelocity(g, rho.quad, arr - g.grad(phi)[None], rho)


def project_exact(u: MultiVelocity, rho: MultiDensity) -> tuple[MultiVelocity, np.ndarray]:
    """Split ``u`` into the kernel of the anchor plus per-phase gradients.

    Returns ``(u - grad f, f)`` where ``div(rho_i grad f_i) = div(rho_i u_i)``.
    """
    require_constrained(u, rho)
    g = rho.grid
    pots = np.stack(
        [g.solve_weighted_poisson(rho.rho[i], g.div(rho.rho[i] * u.u[i])) for i in range(rho.n)]
    )
    kernel = MultiVelocity(g, rho.quad, u.u - g.grad(pots), rho)
    return kernel, pots


# -- inertia and pairings ---------------------------------------------------


def inertia(u: MultiVelocity, rho: MultiDensity) -> MomentumCoset:
    """``u -> [u^flat]``; on the flat torus the components carry over unchanged."""
    require_constrained(u, rho)
    return normalize_coset(u.u, rho)


def inertia_inverse(a: MomentumCoset) -> MultiVelocity:
    """Sharp of the co-closed representative."""
    require_normal_coset(a)
    return MultiVelocity(a.grid, a.quad, a.alpha, a.rho)


def pairing(a: MomentumCoset, u: MultiVelocity, rho: MultiDensity | None = None) -> float:
    """``sum_i w_i int alpha_i(u_i) rho_i``."""
    rho = rho if rho is not None else a.rho
    _check_quads(a.quad, u.quad, rho.quad)
    return _weighted_integral(rho, dot(a.alpha, u.u, rho.grid))


def pairing_raw(alpha: np.ndarray, u: MultiVelocity, rho: MultiDensity) -> float:
    """Pairing with an arbitrary (not normalized) 1-form representative."""
    return _weighted_integral(rho, dot(np.asarray(alpha, dtype=float), u.u, rho.grid))


def pairing_base(f: np.ndarray, xi: TangentDensity) -> float:
    """``sum_i w_i int f_i xi_i``: function-tuple coset against a tangent density."""
    return float(xi.quad.weights @ np.asarray(xi.grid.integrate(np.asarray(f) * xi.xi)))


def cotangent_pairing(y: DualCotangent, tangent: tuple[MomentumCoset, TangentDensity]) -> float:
    """Pair ``(v, [g])`` with a tangent vector ``(delta_alpha, xi)`` to the dual bundle."""
    da, xi = tangent
    return pairing(da, y.v, da.rho) + pairing_base(y.f, xi)


def energy_of(u: MultiVelocity, rho: MultiDensity) -> float:
    """``1/2 sum_i w_i int |u_i|^2 rho_i``."""
    return 0.5 * _weighted_integral(rho, dot(u.u, u.u, rho.grid))


# -- Poisson structure ------------------------------------------------------


def _tensor_inputs(a: MomentumCoset, x: DualCotangent, y: DualCotangent):
    _check_quads(a.quad, x.quad, y.quad)
    if x.grid != a.grid or y.grid != a.grid:
        raise StructureError("tensor arguments live on different grids")
    return a.rho, a.grid


def poisson_tensor(a: MomentumCoset, x: DualCotangent, y: DualCotangent) -> float:
    """``sum_i w_i int (-d(alpha_i)(u_i, v_i) + u_i . grad g_i - v_i . grad f_i) rho_i``."""
    rho, g = _tensor_inputs(a, x, y)
    u, v = x.v.u, y.v.u
    integrand = -two_form(a.alpha, u, v, g) + directional(u, y.f, g) - directional(v, x.f, g)
    return _weighted_integral(rho, integrand)


def poisson_tensor_lie_form(a: MomentumCoset, x: DualCotangent, y: DualCotangent) -> float:
    """The same tensor in Lie-Poisson form with correction terms.

    ``sum_i w_i int (alpha_i([u_i, v_i]) + v_i . grad(alpha_i(u_i) - f_i)
    - u_i . grad(alpha_i(v_i) - g_i)) rho_i``.  Agrees with
    :func:`poisson_tensor` up to aliasing of the pointwise products.
    """
    rho, g = _tensor_inputs(a, x, y)
    alpha, u, v = a.alpha, x.v.u, y.v.u
    integrand = (
        dot(alpha, lie_bracket(u, v, g), g)
        + directional(v, dot(alpha, u, g) - x.f, g)
        - directional(u, dot(alpha, v, g) - y.f, g)
    )
    return _weighted_integral(rho, integrand)


def hamiltonian_operator(a: MomentumCoset, x: DualCotangent) -> tuple[MomentumCoset, TangentDensity]:
    """``(u, [f]) -> (-[i_u d(alpha)] - [d f], anchor(u))``."""
    require_normal_coset(a)
    require_normal_functions(x.f, a.grid)
    _check_quads(a.quad, x.quad)
    g = a.grid
    u = x.v
    da = normalize_coset(-interior_two_form(a.alpha, u.u, g) - g.grad(x.f), a.rho)
    return da, anchor(u, a.rho)


def energy_and_dH(a: MomentumCoset) -> tuple[float, DualCotangent]:
    """Kinetic energy ``H = 1/2 sum_i w_i int |alpha_i|^2 rho_i`` and its differential.

    The fiber part is the sharp of ``alpha``; the base part is the coset of
    ``|alpha_i|^2 / 2``.
    """
    require_normal_coset(a)
    u = inertia_inverse(a)
    half_sq = 0.5 * dot(a.alpha, a.alpha, a.grid)
    H = _weighted_integral(a.rho, half_sq)
    return H, DualCotangent(u, normalize_dual_cotangent(half_sq, a.grid))


# -- sections and their bracket ---------------------------------------------


@dataclass(frozen=True)
class Section:
    """A rule assigning to each multiphase density a constrained velocity tuple."""

    fn: Callable[[MultiDensity], MultiVelocity]
    h: float = DEFAULT_FD_STEP
    name: str = "section"

    def __call__(self, rho: MultiDensity) -> MultiVelocity:
        return self.fn(rho)

    def scaled(self, F: Callable[[MultiDensity], float], name: str | None = None) -> "Section":
        """The section ``rho -> F(rho) V(rho)`` for a scalar functional ``F``."""

        def fn(rho):
            v = self.fn(rho)
            return MultiVelocity(v.grid, v.quad, F(rho) * v.u, rho)

        return Section(fn, self.h, name or f"F*{self.name}")


def projected_constant(v_raw: np.ndarray, h: float = DEFAULT_FD_STEP) -> Section:
    """Section ``rho -> project_constraint(v_raw, rho)``."""
    v_raw = np.array(v_raw, dtype=float)
    return Section(lambda rho: project_constraint(v_raw, rho), h, "projected_constant")


def potential_section(phi: np.ndarray, grid: Grid, h: float = DEFAULT_FD_STEP) -> Section:
    """Section ``rho -> project_constraint(grad phi, rho)`` for fixed potentials ``phi``."""
    v_raw = grid.grad(np.asarray(phi, dtype=float))
    return Section(lambda rho: project_constraint(v_raw, rho), h, "potential")


def density_weighted(v_raw: np.ndarray, h: float = DEFAULT_FD_STEP) -> Section:
    """Section ``rho -> project_constraint(rho_i v_raw_i, rho)``.

    Unlike the two constructors above it depends nonlinearly on ``rho``, so
    finite differences along the base carry a visible truncation error.
    """
    v_raw = np.array(v_raw, dtype=float)
    return Section(lambda rho: project_constraint(rho.rho[:, None] * v_raw, rho), h, "density_weighted")


@dataclass(frozen=True)
class BracketResult:
    value: MultiVelocity
    constraint_residual: float


def _shifted(rho: MultiDensity, xi: TangentDensity, s: float) -> MultiDensity:
    out = MultiDensity(rho.grid, rho.quad, rho.rho + s * xi.xi)
    if not np.all(out.rho > 0):
        raise StepSizeError(f"density perturbation of size {s:.3e} leaves the positive cone")
    return out


def derivative_along(V: Section, rho: MultiDensity, xi: TangentDensity, h: float) -> np.ndarray:
    """Centered difference of ``V`` along the straight density line ``rho + t xi``."""
    plus = V(_shifted(rho, xi, 0.5 * h)).u
    minus = V(_shifted(rho, xi, -0.5 * h)).u
    return (plus - minus) / h


def bracket_sections(U: Section, V: Section, rho: MultiDensity, h: float | None = None) -> BracketResult:
    """Algebroid bracket ``[U, V] + L_{#U} V - L_{#V} U`` at ``rho``."""
    h = U.h if h is None else h
    g = rho.grid
    u, v = U(rho), V(rho)
    xi_u, xi_v = anchor(u, rho), anchor(v, rho)
    val = lie_bracket(u.u, v.u, g) + derivative_along(V, rho, xi_u, h) - derivative_along(U, rho, xi_v, h)
    out = MultiVelocity(g, rho.quad, val, rho)
    flux = rho.quad.wsum(rho.rho[:, None] * val)
    return BracketResult(out, g.norm(g.div(flux)))


def bracket_section(U: Section, V: Section, h: float | None = None) -> Section:
    """The bracket as a section in its own right (for nested brackets).

    The value is re-projected onto the constraint: the finite-difference and
    aliasing errors of the inner bracket would otherwise make the outer
    anchor undefined on coarse grids.
    """
    step = U.h if h is None else h

    def fn(rho):
        return project_constraint(bracket_sections(U, V, rho, step).value.u, rho)

    return Section(fn, step, f"[{U.name},{V.name}]")


def jacobi_residual(U: Section, V: Section, W: Section, rho: MultiDensity, h: float | None = None) -> float:
    """L2(rho) size of the cyclic sum of nested brackets (reported, not asserted)."""
    terms = [
        bracket_sections(bracket_section(A, B, h), C, rho, h).value.u
        for A, B, C in ((U, V, W), (V, W, U), (W, U, V))
    ]
    total = MultiVelocity(rho.grid, rho.quad, sum(terms), rho)
    return float(np.sqrt(2.0 * energy_of(total, rho)))


def linear_density_functional(phi: np.ndarray, phase: int = 0) -> Callable[[MultiDensity], float]:
    """``F(rho) = int phi rho_phase``."""
    phi = np.asarray(phi, dtype=float)
    return lambda rho: float(rho.grid.integrate(phi * rho.rho[phase]))


def leibniz_residual(U: Section, V: Section, phi: np.ndarray, rho: MultiDensity, h: float, phase: int = 0) -> float:
    """L2(rho) norm of ``[U, F V] - F [U, V] - (L_{#U} F) V`` for ``F = int phi rho_phase``.

    The base derivative of ``F`` is evaluated exactly as ``int phi xi_phase``.
    """
    F = linear_density_functional(phi, phase)
    FV = V.scaled(F)
    lhs = bracket_sections(U, FV, rho, h).value.u
    base = bracket_sections(U, V, rho, h).value.u
    xi = anchor(U(rho), rho)
    dF = float(rho.grid.integrate(phi * xi.xi[phase]))
    diff = lhs - F(rho) * base - dF * V(rho).u
    return float(np.sqrt(2.0 * energy_of(MultiVelocity(rho.grid, rho.quad, diff), rho)))
