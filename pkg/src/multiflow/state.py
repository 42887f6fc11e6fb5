"""Validated state types for multiphase and generalized flows.

Every type is a frozen dataclass around read-only numpy arrays.  Phase
axes come first: densities are ``(n, *grid.shape)`` and velocities or
1-form coefficients are ``(n, dim, *grid.shape)``.

Constructors only check structure (phase counts, grids, shapes) and raise
:class:`StructureError` on mismatch.  Numerical invariants are checked by
:func:`validate`, which returns a :class:`Report` instead of raising.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import NormalFormError, StructureError, ValidationError
from .spectral import Grid

#: pointwise tolerance on sum_i w_i rho_i = 1 and on the masses
DENSITY_TOL = 1e-10
#: L2 tolerance of the joint divergence constraint and of the co-closed normal form
CONSTRAINT_TOL = 1e-8
#: tolerance of the tangent-density conditions (zero weighted sum, zero integrals)
TANGENT_TOL = 1e-10
#: tolerance of the function-tuple normal form
DUAL_NORMAL_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class QuadratureSet:
    """Finite phase space: labels, quadrature weights and phase masses."""

    weights: np.ndarray
    masses: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        w = _frozen(np.atleast_1d(self.weights))
        c = _frozen(np.atleast_1d(self.masses))
        if w.ndim != 1 or c.shape != w.shape or w.size == 0:
            raise StructureError(f"weights {w.shape} and masses {c.shape} must be equal-length 1D arrays")
        labels = tuple(self.labels) or tuple(f"phase{i + 1}" for i in range(w.size))
        if len(labels) != w.size:
            raise StructureError(f"{len(labels)} labels for {w.size} phases")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "masses", c)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.weights.size

    @classmethod
    def unit(cls, masses) -> "QuadratureSet":
        """Multiphase setting: every phase has weight one."""
        masses = np.atleast_1d(np.asarray(masses, dtype=float))
        return cls(np.ones_like(masses), masses)

    @classmethod
    def trapezoid(cls, masses) -> "QuadratureSet":
        """Trapezoid rule on the label interval [0, 1] with ``len(masses)`` nodes."""
        masses = np.atleast_1d(np.asarray(masses, dtype=float))
        m = masses.size
        if m < 2:
            raise StructureError("trapezoid quadrature needs at least two nodes")
        w = np.full(m, 1.0 / (m - 1))
        w[[0, -1]] *= 0.5
        labels = tuple(f"a={a:.6g}" for a in np.linspace(0.0, 1.0, m))
        return cls(w, masses, labels)

    @staticmethod
    def trapezoid_nodes(m: int) -> np.ndarray:
        return np.linspace(0.0, 1.0, m)

    def wsum(self, arr: np.ndarray) -> np.ndarray:
        """Weighted phase sum ``sum_i w_i arr[i]``."""
        arr = np.asarray(arr, dtype=float)
        if arr.shape[0] != self.n:
            raise StructureError(f"expected {self.n} phases, got leading axis {arr.shape[0]}")
        return np.tensordot(self.weights, arr, axes=1)

    def same_as(self, other: "QuadratureSet") -> bool:
        return self is other or (
            np.array_equal(self.weights, other.weights) and np.array_equal(self.masses, other.masses)
        )


def _check_quads(*quads: QuadratureSet) -> None:
    first = quads[0]
    for q in quads[1:]:
        if not first.same_as(q):
            raise StructureError("objects live over different quadrature sets")


@dataclass(frozen=True)
class MultiDensity:
    """Phase densities ``rho[i]`` (coefficients against the volume form)."""

    grid: Grid
    quad: QuadratureSet
    rho: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.rho)
        expect = (self.quad.n, *self.grid.shape)
        if rho.shape != expect:
            raise StructureError(f"density array has shape {rho.shape}, expected {expect}")
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.quad.n

    def total(self) -> np.ndarray:
        return self.quad.wsum(self.rho)

    def masses(self) -> np.ndarray:
        return np.asarray(self.grid.integrate(self.rho))

    def renormalized(self) -> tuple["MultiDensity", float]:
        """Divide every phase by the pointwise weighted sum; also return the drift it removed."""
        s = self.total()
        drift = float(np.max(np.abs(s - 1.0)))
        return MultiDensity(self.grid, self.quad, self.rho / s), drift


@dataclass(frozen=True)
class MultiVelocity:
    """Phase velocities ``u[i]``; ``rho`` is set when the tuple is meant to be constrained."""

    grid: Grid
    quad: QuadratureSet
    u: np.ndarray
    rho: MultiDensity | None = None

    def __post_init__(self):
        u = _frozen(self.u)
        expect = (self.quad.n, self.grid.dim, *self.grid.shape)
        if u.shape != expect:
            raise StructureError(f"velocity array has shape {u.shape}, expected {expect}")
        if self.rho is not None:
            if self.rho.grid != self.grid:
                raise StructureError("velocity and density live on different grids")
            _check_quads(self.quad, self.rho.quad)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.quad.n

    def constraint_residual(self, rho: MultiDensity | None = None) -> float:
        """L2 norm of ``div(sum_i w_i rho_i u_i)``."""
        rho = rho if rho is not None else self.rho
        if rho is None:
            raise StructureError("constraint residual needs a density")
        _check_quads(self.quad, rho.quad)
        flux = self.quad.wsum(rho.rho[:, None] * self.u)
        return self.grid.norm(self.grid.div(flux))


@dataclass(frozen=True)
class TangentDensity:
    """Tangent vector ``xi`` to the space of multiphase densities."""

    grid: Grid
    quad: QuadratureSet
    xi: np.ndarray

    def __post_init__(self):
        xi = _frozen(self.xi)
        expect = (self.quad.n, *self.grid.shape)
        if xi.shape != expect:
            raise StructureError(f"tangent array has shape {xi.shape}, expected {expect}")
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class MomentumCoset:
    """Tuple of 1-forms modulo a common exact form, stored in co-closed normal form.

    On the flat torus a 1-form and its metric dual share coefficients, so
    ``alpha`` has the same layout as a velocity array.
    """

    rho: MultiDensity
    alpha: np.ndarray

    def __post_init__(self):
        alpha = _frozen(self.alpha)
        g = self.rho.grid
        expect = (self.rho.n, g.dim, *g.shape)
        if alpha.shape != expect:
            raise StructureError(f"1-form array has shape {alpha.shape}, expected {expect}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def quad(self) -> QuadratureSet:
        return self.rho.quad

    def normal_form_residual(self) -> float:
        flux = self.quad.wsum(self.rho.rho[:, None] * self.alpha)
        return self.grid.norm(self.grid.div(flux))


@dataclass(frozen=True)
class DualCotangent:
    """Cotangent vector ``(v, [f])`` to the dual bundle: fiber part and function-tuple coset."""

    v: MultiVelocity
    f: np.ndarray

    def __post_init__(self):
        f = _frozen(self.f)
        expect = (self.v.n, *self.v.grid.shape)
        if f.shape != expect:
            raise StructureError(f"function tuple has shape {f.shape}, expected {expect}")
        object.__setattr__(self, "f", f)

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @property
    def quad(self) -> QuadratureSet:
        return self.v.quad


# -- validation reports ------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class Report:
    """Per-invariant residuals and an overall verdict."""

    kind: str
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def raise_if_failed(self, exc=ValidationError) -> "Report":
        bad = self.failures()
        if bad:
            detail = ", ".join(f"{c.name}={c.residual:.3e} (tol {c.tol:.1e})" for c in bad)
            raise exc(f"{self.kind} failed validation: {detail}")
        return self

    def summary(self) -> str:
        lines = [f"{self.kind}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(f"  {c.name:<24} {c.residual:.3e}  tol {c.tol:.1e}  {'ok' if c.passed else 'FAIL'}")
        return "\n".join(lines)


def _le(name: str, residual: float, tol: float) -> Check:
    residual = float(residual)
    return Check(name, residual, tol, bool(np.isfinite(residual) and residual <= tol))


@functools.singledispatch
def validate(obj, grid: Grid | None = None) -> Report:
    """Check the invariants of a state object and report residuals."""
    raise StructureError(f"cannot validate objects of type {type(obj).__name__}")


@validate.register
def _(obj: QuadratureSet, grid: Grid | None = None) -> Report:
    w_min, c_min = float(obj.weights.min()), float(obj.masses.min())
    checks = [
        Check("weights_positive", w_min, 0.0, w_min > 0),
        Check("masses_positive", c_min, 0.0, c_min > 0),
    ]
    if grid is not None:
        vol = grid.volume
        checks.append(_le("total_measure", abs(float(obj.weights @ obj.masses) - vol) / vol, DENSITY_TOL))
    return Report("QuadratureSet", tuple(checks))


@validate.register
def _(obj: MultiDensity, grid: Grid | None = None) -> Report:
    rho = obj.rho
    checks = list(validate(obj.quad, obj.grid).checks)
    min_rho = float(rho.min())
    checks.append(Check("positivity", min_rho, 0.0, bool(min_rho > 0)))
    checks.append(_le("pointwise_sum", np.max(np.abs(obj.total() - 1.0)), DENSITY_TOL))
    mass_err = np.abs(obj.masses() - obj.quad.masses)
    checks.append(_le("masses", np.max(mass_err / np.maximum(obj.quad.masses, 1.0)), DENSITY_TOL))
    return Report("MultiDensity", tuple(checks))


@validate.register
def _(obj: MultiVelocity, grid: Grid | None = None) -> Report:
    finite = bool(np.all(np.isfinite(obj.u)))
    checks = [Check("finite", 0.0 if finite else float("inf"), 0.0, finite)]
    if obj.rho is not None:
        checks.extend(validate(obj.rho).checks)
        checks.append(_le("constraint", obj.constraint_residual(), CONSTRAINT_TOL))
    return Report("MultiVelocity", tuple(checks))


@validate.register
def _(obj: TangentDensity, grid: Grid | None = None) -> Report:
    g = obj.grid
    scale = max(1.0, float(np.max(np.abs(obj.xi))))
    checks = [
        _le("pointwise_sum", np.max(np.abs(obj.quad.wsum(obj.xi))) / scale, TANGENT_TOL),
        _le("zero_integrals", np.max(np.abs(g.integrate(obj.xi))) / (scale * g.volume), TANGENT_TOL),
    ]
    return Report("TangentDensity", tuple(checks))


@validate.register
def _(obj: MomentumCoset, grid: Grid | None = None) -> Report:
    checks = list(validate(obj.rho).checks)
    checks.append(_le("co_closed", obj.normal_form_residual(), CONSTRAINT_TOL))
    return Report("MomentumCoset", tuple(checks))


@validate.register
def _(obj: DualCotangent, grid: Grid | None = None) -> Report:
    checks = list(validate(obj.v).checks)
    f = obj.f
    scale = max(1.0, float(np.max(np.abs(f))))
    checks.append(_le("last_component_zero", np.max(np.abs(f[-1])) / scale, DUAL_NORMAL_TOL))
    checks.append(_le("mean_zero", np.max(np.abs(obj.grid.mean(f))) / scale, DUAL_NORMAL_TOL))
    return Report("DualCotangent", tuple(checks))


# -- normal forms -----------------------------------------------------------


def normalize_coset(alpha_raw: np.ndarray, rho: MultiDensity) -> MomentumCoset:
    """Co-closed representative of the coset of ``alpha_raw``.

    Subtracts the common gradient ``grad(phi)`` with
    ``lap(phi) = div(sum_i w_i rho_i alpha_i)``, which leaves
    ``sum_i w_i rho_i alpha_i`` divergence free because ``sum_i w_i rho_i = 1``.
    """
    g = rho.grid
    alpha_raw = np.asarray(alpha_raw, dtype=float)
    expect = (rho.n, g.dim, *g.shape)
    if alpha_raw.shape != expect:
        raise StructureError(f"1-form array has shape {alpha_raw.shape}, expected {expect}")
    flux = rho.quad.wsum(rho.rho[:, None] * alpha_raw)
    phi = g.solve_poisson(g.div(flux))
    return MomentumCoset(rho, alpha_raw - g.grad(phi)[None])


def normalize_dual_cotangent(f_raw: np.ndarray, grid: Grid | None = None) -> np.ndarray:
    """Normal form of a function-tuple coset: last component zero, all means zero."""
    f = np.asarray(f_raw, dtype=float)
    if f.ndim < 2:
        raise StructureError("function tuple needs a leading phase axis")
    f = f - f[-1]
    axes = tuple(range(1, f.ndim)) if grid is None else grid.axes
    f = f - f.mean(axis=axes, keepdims=True)
    f[-1] = 0.0
    return f


def require_normal_coset(a: MomentumCoset, tol: float = CONSTRAINT_TOL) -> None:
    r = a.normal_form_residual()
    if not r <= tol:
        raise NormalFormError(f"momentum coset is not co-closed (residual {r:.3e} > {tol:.1e})")


def require_normal_functions(f: np.ndarray, grid: Grid, tol: float = DUAL_NORMAL_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(f))))
    r = max(float(np.max(np.abs(f[-1]))), float(np.max(np.abs(grid.mean(f))))) / scale
    if not r <= tol:
        raise NormalFormError(f"function tuple is not in normal form (residual {r:.3e})")
