"""Random band-limited states for randomized property suites.

Fields are trigonometric polynomials with every |k_j| <= K.  Keeping K
small (K <= N/8 or so) makes pointwise products of a few fields alias-free
on the grid, which is what identities relying on the product rule need.
"""

from __future__ import annotations

import numpy as np

from .spectral import Grid
from .state import MultiDensity, QuadratureSet


def random_field(grid: Grid, rng: np.random.Generator, K: int = 3, lead: tuple[int, ...] = (), amp: float = 1.0):
    """Random real field(s) of shape ``lead + grid.shape`` with modes up to ``K``."""
    if not 1 <= K < grid.n // 2:
        raise ValueError(f"band limit K={K} must lie in [1, N/2)")
    k = np.arange(-K, K + 1)
    out = np.zeros(lead + grid.shape)
    coords = grid.coords
    for idx in np.ndindex(*((2 * K + 1,) * grid.dim)):
        kv = k[list(idx)]
        if np.all(kv == 0):
            continue
        phase = sum(kj * xj for kj, xj in zip(kv, coords))
        decay = 1.0 / (1.0 + float(kv @ kv))
        a = rng.standard_normal(lead + (1,) * grid.dim) * decay
        b = rng.standard_normal(lead + (1,) * grid.dim) * decay
        out += a * np.cos(phase) + b * np.sin(phase)
    scale = np.max(np.abs(out)) if out.size else 1.0
    return amp * out / scale


def random_density(
    grid: Grid,
    weights,
    rng: np.random.Generator,
    K: int = 3,
    spread: float = 0.5,
) -> MultiDensity:
    """Positive densities with ``sum_i w_i rho_i = 1`` and masses taken from their integrals.

    Every phase oscillates around the common level ``1 / sum(w)``; the last
    phase is fixed by the pointwise constraint, so the relative amplitude of
    the others is capped to keep it positive.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    base = 1.0 / w.sum()
    if n == 1:
        rho = np.full((1, *grid.shape), base)
    else:
        eps = spread * min(1.0, w[-1] / w[:-1].sum())
        p = random_field(grid, rng, K, lead=(n - 1,))
        head = base * (1.0 + eps * p)
        last = (1.0 - np.tensordot(w[:-1], head, axes=1)) / w[-1]
        rho = np.concatenate([head, last[None]])
    # recompute the last phase so the constraint holds to round-off
    if n > 1:
        rho[-1] = (1.0 - np.tensordot(w[:-1], rho[:-1], axes=1)) / w[-1]
    masses = np.asarray(grid.integrate(rho))
    quad = QuadratureSet(w, masses)
    return MultiDensity(grid, quad, rho)


def random_velocity(grid: Grid, n: int, rng: np.random.Generator, K: int = 3, amp: float = 1.0) -> np.ndarray:
    """Raw (unconstrained) velocity tuple of shape ``(n, dim, *grid.shape)``."""
    return random_field(grid, rng, K, lead=(n, grid.dim), amp=amp)


def random_functions(grid: Grid, n: int, rng: np.random.Generator, K: int = 3, amp: float = 1.0) -> np.ndarray:
    """Raw function tuple of shape ``(n, *grid.shape)``."""
    return random_field(grid, rng, K, lead=(n,), amp=amp)
