"""Explicit finite-volume solver on a periodic box.

Convection uses the local Lax-Friedrichs (Rusanov) flux, diffusion the
conservative second difference of the primitive A(u), dimension by
dimension.  Noise enters by an Euler-Maruyama substep after the
deterministic update.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientModel
from .errors import CFLError, InputValidationError
from .noise import NoiseModel, WienerPath, noise_increment, wiener_path

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    d: int
    nx: int
    box: float  # half-width X of the periodic box [-X, X]^d
    T: float
    cfl: float
    dt: float
    steps: int

    @property
    def dx(self) -> float:
        return 2.0 * self.box / self.nx

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d

    @property
    def axis(self) -> np.ndarray:
        return -self.box + self.dx * (np.arange(self.nx) + 0.5)

    @property
    def coords(self) -> tuple[np.ndarray, ...]:
        return (self.axis,) * self.d

    def mesh(self):
        return np.meshgrid(*self.coords, indexing="ij")

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d


def make_grid(model: CoefficientModel, nx: int, box: float, T: float,
              cfl: float = 0.4, d: int | None = None) -> GridSpec:
    """dt = cfl * min(dx / max|f|_1, dx^2 / (2 d max||a||)), shrunk so that T is hit exactly."""
    d = model.d if d is None else int(d)
    if d != model.d:
        raise InputValidationError(f"grid dimension {d} does not match model dimension {model.d}")
    if d not in (1, 2):
        raise InputValidationError("only d in {1, 2} is supported")
    if nx < 4:
        raise InputValidationError("need at least 4 cells per axis")
    if not 0 < cfl <= 0.5:
        raise InputValidationError("cfl factor must lie in (0, 0.5]")
    if not (T > 0 and box > 0):
        raise InputValidationError("T and box must be positive")
    dx = 2.0 * box / nx
    bounds = []
    fmax = model.max_flux_speed()
    amax = model.max_diffusion()
    if fmax > 0:
        bounds.append(dx / fmax)
    if amax > 0:
        bounds.append(dx * dx / (2 * d * amax))
    dt = cfl * min(bounds) if bounds else T
    steps = max(1, math.ceil(T / dt - 1e-12))
    return GridSpec(d=d, nx=int(nx), box=float(box), T=float(T), cfl=float(cfl),
                    dt=T / steps, steps=steps)


# -- spatial operator -------------------------------------------------------

def convection_divergence(model: CoefficientModel, u: np.ndarray, dx: float) -> np.ndarray:
    """Rusanov approximation of div F(u)."""
    F = model.flux_primitive(u)
    out = np.zeros_like(u)
    for k in range(u.ndim):
        ur = np.roll(u, -1, axis=k)
        Fk = F[..., k]
        c = model.axis_speeds(np.minimum(u, ur), np.maximum(u, ur))[..., k]
        if not np.any(c) and not np.any(Fk):
            continue
        num = 0.5 * (Fk + np.roll(Fk, -1, axis=k)) - 0.5 * c * (ur - u)
        out += (num - np.roll(num, 1, axis=k)) / dx
    return out


def diffusion_term(model: CoefficientModel, u: np.ndarray, dx: float) -> np.ndarray:
    """sum_ij d_i d_j A_ij(u) by central differences."""
    A = model.diffusion_primitive(u)
    out = np.zeros_like(u)
    nd = u.ndim
    for i in range(nd):
        Aii = A[..., i, i]
        if np.any(Aii):
            out += (np.roll(Aii, -1, axis=i) - 2.0 * Aii + np.roll(Aii, 1, axis=i)) / (dx * dx)
        for j in range(i + 1, nd):
            Aij = A[..., i, j] + A[..., j, i]
            if not np.any(Aij):
                continue
            pp = np.roll(np.roll(Aij, -1, axis=i), -1, axis=j)
            pm = np.roll(np.roll(Aij, -1, axis=i), 1, axis=j)
            mp = np.roll(np.roll(Aij, 1, axis=i), -1, axis=j)
            mm = np.roll(np.roll(Aij, 1, axis=i), 1, axis=j)
            out += (pp - pm - mp + mm) / (4.0 * dx * dx)
    return out


def stability_number(model: CoefficientModel, lo: float, hi: float, grid: GridSpec) -> float:
    """sum_k max|f_k| dt/dx + 2 dt sum_k max a_kk / dx^2 over states in [lo, hi]."""
    lam = np.linspace(lo, hi, 513)
    speeds = np.max(np.abs(model.flux(lam)), axis=0).sum()
    diag = np.max(np.abs(np.diagonal(model.diffusion(lam), axis1=-2, axis2=-1)), axis=0).sum()
    return speeds * grid.dt / grid.dx + 2.0 * grid.dt * diag / grid.dx ** 2


def _check_stability(model, grid, u):
    lo, hi = float(u.min()), float(u.max())
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise CFLError("non-finite state encountered")
    ilo, ihi = model.interval
    if lo >= ilo and hi <= ihi:
        return
    nu = stability_number(model, min(lo, ilo), max(hi, ihi), grid)
    if nu > 1.0 + 1e-12:
        raise CFLError(f"state range [{lo:.4g}, {hi:.4g}] left the interval the time step was "
                       f"built for; stability number {nu:.3f} > 1")


def step_deterministic(model: CoefficientModel, grid: GridSpec, u: np.ndarray) -> np.ndarray:
    """One forward-Euler step of u_t + div F(u) = div(a(u) grad u)."""
    _check_stability(model, grid, u)
    rhs = diffusion_term(model, u, grid.dx) - convection_divergence(model, u, grid.dx)
    return u + grid.dt * rhs


def step_stochastic(model: CoefficientModel, nm: NoiseModel, grid: GridSpec,
                    u: np.ndarray, increment: np.ndarray | None) -> np.ndarray:
    """Deterministic substep followed by the noise increment (computed from u^m)."""
    out = step_deterministic(model, grid, u)
    if nm is None or nm.modes == 0 or increment is None:
        return out
    return out + increment


# -- solution container -----------------------------------------------------

@dataclass
class SolutionField:
    grid: GridSpec
    times: np.ndarray
    snapshots: np.ndarray  # (n_snap, *grid.shape)
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def summary(self):
        """Rows (t, mass, min, max, l2) for each snapshot."""
        vol = self.grid.cell_volume
        axes = tuple(range(1, self.snapshots.ndim))
        mass = self.snapshots.sum(axis=axes) * vol
        l2 = np.sqrt((self.snapshots ** 2).sum(axis=axes) * vol)
        return [
            (float(t), float(m), float(lo), float(hi), float(e))
            for t, m, lo, hi, e in zip(self.times, mass, self.snapshots.min(axis=axes),
                                       self.snapshots.max(axis=axes), l2)
        ]


def solve(model: CoefficientModel, grid: GridSpec, u0: np.ndarray, noise: NoiseModel | None = None,
          path: WienerPath | None = None, stride: int = 1, meta: dict | None = None) -> SolutionField:
    """March u0 to grid.T, storing every ``stride``-th step (and always the last)."""
    u = np.array(u0, dtype=float)
    if u.shape != grid.shape:
        raise InputValidationError(f"initial data shape {u.shape} != grid shape {grid.shape}")
    stochastic = noise is not None and noise.modes > 0
    if stochastic:
        if path is None:
            path = wiener_path(noise.modes, grid.T, grid.steps, seed=noise.seed)
        if path.steps != grid.steps or path.modes != noise.modes:
            raise InputValidationError("Wiener path does not match grid steps / noise modes")
    stride = max(1, int(stride))
    coords = grid.coords
    times, snaps = [0.0], [u.copy()]
    for m in range(grid.steps):
        if stochastic:
            inc = noise_increment(noise, path, m, u, coords)
            u = step_stochastic(model, noise, grid, u, inc)
        else:
            u = step_deterministic(model, grid, u)
        if (m + 1) % stride == 0 or m + 1 == grid.steps:
            times.append((m + 1) * grid.dt)
            snaps.append(u.copy())
    info = {
        "model": model.name,
        "model_params": dict(model.params),
        "interval": list(model.interval),
        "d": grid.d, "nx": grid.nx, "box": grid.box, "T": grid.T, "cfl": grid.cfl,
        "dt": grid.dt, "steps": grid.steps, "stride": stride,
        "noise_modes": noise.modes if noise is not None else 0,
        "seed": path.seed if stochastic else None,
        "path_id": path.path_id if stochastic else None,
    }
    if meta:
        info.update(meta)
    return SolutionField(grid=grid, times=np.array(times), snapshots=np.stack(snaps), meta=info)


def solve_ensemble(model, grid, u0, noise: NoiseModel, paths: int, seed: int | None = None,
                   stride: int = 1, meta: dict | None = None) -> list[SolutionField]:
    """Independent paths keyed by (seed, path_id)."""
    seed = noise.seed if seed is None else seed
    out = []
    for pid in range(paths):
        wp = wiener_path(noise.modes, grid.T, grid.steps, seed=seed, path_id=pid)
        out.append(solve(model, grid, u0, noise, wp, stride=stride, meta=meta))
    return out


def run(config):
    """Build everything from an ExperimentConfig (or a path to one) and solve.

    Returns one SolutionField, or a list of them for a stochastic ensemble.
    """
    from . import config as cfgmod
    from .harness import run_solution

    cfg = config if isinstance(config, cfgmod.ExperimentConfig) else cfgmod.load(config)
    return run_solution(cfg)


# -- initial data ------------------------------------------------------------

def initial_riemann(grid: GridSpec, left: float, right: float, x0: float = 0.0) -> np.ndarray:
    """Piecewise constant along the first axis (the periodic wrap adds a second jump)."""
    x = grid.mesh()[0]
    return np.where(x < x0, float(left), float(right))


def initial_bump(grid: GridSpec, amplitude: float = 1.0, radius: float = 1.0, center=None) -> np.ndarray:
    """C-infinity bump  A exp(1 - 1/(1 - |x - c|^2/R^2))  inside the ball of radius R."""
    mesh = grid.mesh()
    center = [0.0] * grid.d if center is None else list(center)
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, center)) / radius ** 2
    out = np.zeros(grid.shape)
    inside = r2 < 1.0
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def initial_sine(grid: GridSpec, k: int = 1, amplitude: float = 1.0) -> np.ndarray:
    """amplitude * prod_i sin(k pi x_i / X): a periodic Fourier mode."""
    out = np.full(grid.shape, float(amplitude))
    for m in grid.mesh():
        out = out * np.sin(k * np.pi * m / grid.box)
    return out
