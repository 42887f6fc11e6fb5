"""Fourier calculus on the flat periodic torus T^d (d = 1, 2) of side 2*pi.

Fields are plain numpy arrays whose trailing ``dim`` axes are the grid axes
(``indexing="ij"``, so axis -2 is x and axis -1 is y in 2D).  Vector fields
carry one extra axis of length ``dim`` just before the grid axes, so a tuple
of ``n`` phase velocities is an array of shape ``(n, dim, N, N)``.  Every
operation broadcasts over any leading axes.

Nyquist modes are treated as unresolved: first derivatives annihilate them,
and the Laplacian is defined as ``div(grad(.))`` so that the discrete
identities used by the projections hold to round-off for *every* grid
function, not only band-limited ones.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConvergenceError, SolvabilityError, StructureError, ValidationError

TWO_PI = 2.0 * math.pi

#: relative tolerance on the mean of a Poisson right-hand side
SOLVABILITY_TOL = 1e-10
#: residual contract of the weighted solver, relative to ||g||_2
WEIGHTED_RESIDUAL_TOL = 1e-10


def fft_workers() -> int:
    """Thread cap for FFTs, from ``MULTIFLOW_THREADS`` (default 1)."""
    raw = os.environ.get("MULTIFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` points per axis on ``[0, 2*pi)^dim``."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValidationError(f"points per axis must be a power of two >= 8, got {self.n}")

    # -- geometry -----------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return TWO_PI**self.dim

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    # -- wavenumbers --------------------------------------------------------
    @cached_property
    def _k(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers broadcastable against the rfftn output."""
        n = self.n
        if self.dim == 1:
            return (np.arange(n // 2 + 1, dtype=float),)
        kx = np.fft.fftfreq(n, 1.0 / n)[:, None]
        ky = np.arange(n // 2 + 1, dtype=float)[None, :]
        return kx, ky

    @cached_property
    def _ik(self) -> tuple[np.ndarray, ...]:
        """Symbols of d/dx_j with the Nyquist mode removed."""
        out = []
        for k in self._k:
            kk = k.copy()
            kk[np.abs(kk) == self.n // 2] = 0.0
            out.append(1j * kk)
        return tuple(out)

    @cached_property
    def _lap(self) -> np.ndarray:
        return sum((ik * ik).real for ik in self._ik)

    @cached_property
    def _inv_lap(self) -> np.ndarray:
        lap = self._lap
        inv = np.zeros_like(lap)
        nz = lap != 0.0
        inv[nz] = 1.0 / lap[nz]
        return inv

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        mask = np.ones(np.broadcast_shapes(*(k.shape for k in self._k)), dtype=bool)
        for k in self._k:
            mask &= np.abs(k) <= self.n / 3.0
        return mask

    # -- transforms ---------------------------------------------------------
    def fft(self, f: np.ndarray) -> np.ndarray:
        return scipy.fft.rfftn(f, axes=self.axes, workers=fft_workers())

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        return scipy.fft.irfftn(fh, s=self.shape, axes=self.axes, workers=fft_workers())

    def _check_scalar(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[f.ndim - self.dim:] != self.shape:
            raise StructureError(f"field of shape {f.shape} does not live on grid {self.shape}")
        return f

    def _check_vector(self, v: np.ndarray) -> np.ndarray:
        v = self._check_scalar(v)
        if v.ndim < self.dim + 1 or v.shape[-self.dim - 1] != self.dim:
            raise StructureError(f"vector field needs a component axis of length {self.dim}, got {v.shape}")
        return v

    # -- calculus -----------------------------------------------------------
    def grad(self, f: np.ndarray) -> np.ndarray:
        fh = self.fft(self._check_scalar(f))
        return np.stack([self.ifft(ik * fh) for ik in self._ik], axis=-self.dim - 1)

    def div(self, v: np.ndarray) -> np.ndarray:
        v = self._check_vector(v)
        comps = np.moveaxis(v, -self.dim - 1, 0)
        acc = sum(ik * self.fft(c) for ik, c in zip(self._ik, comps))
        return self.ifft(acc)

    def curl(self, v: np.ndarray) -> np.ndarray:
        """Scalar curl ``dx v_y - dy v_x`` of a 2D vector field."""
        if self.dim != 2:
            raise StructureError("curl is only defined for 2D vector fields")
        v = self._check_vector(v)
        ikx, iky = self._ik
        return self.ifft(ikx * self.fft(v[..., 1, :, :]) - iky * self.fft(v[..., 0, :, :]))

    def lap(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(self._lap * self.fft(self._check_scalar(f)))

    def perp(self, v: np.ndarray) -> np.ndarray:
        """Rotate a 2D vector field by +90 degrees: (v_x, v_y) -> (-v_y, v_x)."""
        v = self._check_vector(v)
        return np.stack([-v[..., 1, :, :], v[..., 0, :, :]], axis=-3)

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """Zero every Fourier mode with some |k_j| > N/3 (2/3 rule)."""
        return self.ifft(self._dealias_mask * self.fft(self._check_scalar(f)))

    # -- integrals ----------------------------------------------------------
    def integrate(self, f: np.ndarray) -> np.ndarray | float:
        f = self._check_scalar(f)
        out = f.sum(axis=self.axes) * self.cell_volume
        return float(out) if np.ndim(out) == 0 else out

    def mean(self, f: np.ndarray) -> np.ndarray | float:
        f = self._check_scalar(f)
        out = f.mean(axis=self.axes)
        return float(out) if np.ndim(out) == 0 else out

    def norm(self, f: np.ndarray) -> float:
        """L2 norm over the torus, summed over every leading axis."""
        f = self._check_scalar(f)
        return math.sqrt(float(np.sum(f * f)) * self.cell_volume)

    # -- elliptic solvers ---------------------------------------------------
    def _check_solvable(self, g: np.ndarray, tol: float) -> None:
        means = np.atleast_1d(np.abs(self.mean(g)))
        rms = np.atleast_1d(np.sqrt(self.mean(g * g)))
        bad = means > tol * np.maximum(rms, np.finfo(float).tiny)
        if np.any(bad & (means > 0)):
            raise SolvabilityError(
                f"Poisson right-hand side has nonzero mean (|mean|/rms = {float(np.max(means / np.maximum(rms, 1e-300))):.3e})"
            )

    def solve_poisson(self, g: np.ndarray, tol: float = SOLVABILITY_TOL) -> np.ndarray:
        """Mean-zero ``f`` with ``lap(f) = g``."""
        g = self._check_scalar(g)
        self._check_solvable(g, tol)
        return self.ifft(self._inv_lap * self.fft(g))

    def solve_weighted_poisson(
        self,
        rho: np.ndarray,
        g: np.ndarray,
        rtol: float = 1e-13,
        maxiter: int = 1000,
        tol: float = SOLVABILITY_TOL,
    ) -> np.ndarray:
        """Mean-zero ``f`` with ``div(rho grad f) = g``.

        Conjugate gradients on ``-div(rho grad .)``, preconditioned by the
        inverse of the constant-coefficient Laplacian.  Raises
        :class:`ConvergenceError` when the true residual misses
        ``WEIGHTED_RESIDUAL_TOL * ||g||``.
        """
        rho = self._check_scalar(rho)
        g = self._check_scalar(g)
        if rho.shape != self.shape or g.shape != self.shape:
            raise StructureError("weighted Poisson solve takes a single scalar weight and right-hand side")
        if not np.all(rho > 0):
            raise ValidationError(f"weight must be positive, min = {rho.min():.3e}")
        self._check_solvable(g, tol)
        g = g - self.mean(g)
        gnorm = self.norm(g)
        if gnorm == 0.0:
            return np.zeros(self.shape)

        size = g.size

        def apply(x):
            f = x.reshape(self.shape)
            return -self.div(rho * self.grad(f)).ravel()

        def precond(r):
            return -self.ifft(self._inv_lap * self.fft(r.reshape(self.shape))).ravel()

        A = LinearOperator((size, size), matvec=apply, dtype=float)
        M = LinearOperator((size, size), matvec=precond, dtype=float)
        b = -g.ravel()
        x, info = cg(A, b, x0=precond(b), rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
        f = x.reshape(self.shape)
        f -= self.mean(f)
        resid = self.norm(self.div(rho * self.grad(f)) - g)
        if resid > WEIGHTED_RESIDUAL_TOL * gnorm:
            raise ConvergenceError(
                f"weighted Poisson solve stalled (info={info}): residual {resid:.3e} vs ||g|| = {gnorm:.3e}"
            )
        return f

    # -- evaluation off the grid -------------------------------------------
    def evaluate(self, f: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Trigonometric interpolant of a 1D field at arbitrary points."""
        if self.dim != 1:
            raise StructureError("off-grid evaluation is implemented for 1D fields only")
        f = self._check_scalar(f)
        fh = self.fft(f) / self.n
        k = self._k[0]
        coef = np.where((k == 0) | (k == self.n // 2), 1.0, 2.0)[:, None]
        phase = np.exp(1j * np.outer(k, np.asarray(x, dtype=float).ravel()))
        vals = np.real(np.tensordot(fh * coef[:, 0], phase, axes=([-1], [0])))
        return vals.reshape(f.shape[:-1] + np.shape(x))


def spectral_derivative(grid: Grid, f: np.ndarray, kind: str) -> np.ndarray:
    """Apply ``grad``, ``div``, ``curl`` or ``lap`` by name."""
    ops = {"grad": grid.grad, "div": grid.div, "curl": grid.curl, "lap": grid.lap}
    try:
        op = ops[kind]
    except KeyError:
        raise ValidationError(f"unknown derivative kind {kind!r}") from None
    return op(f)
