"""Kinetic (chi-function) densities, velocity averages, and the parabolic
dissipation field of a computed solution."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .coeffs import CoefficientModel
from .errors import InputValidationError, RangeError

VARIANTS = ("chi_plus", "chi_minus", "chi")


def _values(u):
    # accept a SolutionField or a bare array
    return np.asarray(getattr(u, "snapshots", u), dtype=float)


def lambda_midpoints(interval, n_lambda):
    lo, hi = map(float, interval)
    h = (hi - lo) / n_lambda
    return lo + h * (np.arange(n_lambda) + 0.5), h


@dataclass
class KineticDensity:
    lambdas: np.ndarray  # midpoints of a uniform grid over I
    dlam: float
    interval: tuple[float, float]
    variant: str
    values: np.ndarray  # int8, shape u.shape + (N_lambda,)


def chi_values(u, lam, variant):
    """Indicator kernels: chi_+ = 1{lam < u}, chi_- = -1{lam >= u}, chi = 1{lam<u} - 1{lam<0}."""
    u = np.asarray(u, dtype=float)[..., None]
    if variant == "chi_plus":
        return (lam < u).astype(np.int8)
    if variant == "chi_minus":
        return -(lam >= u).astype(np.int8)
    if variant == "chi":
        return (lam < u).astype(np.int8) - (lam < 0).astype(np.int8)
    raise InputValidationError(f"unknown variant {variant!r}; choose from {VARIANTS}")


def _check_range(u, interval):
    lo, hi = interval
    bad = (u < lo) | (u > hi) | ~np.isfinite(u)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise RangeError(f"u={u[idx]!r} at index {idx} escapes the state interval [{lo}, {hi}]")


def chi_density(u, interval, n_lambda: int = 256, variant: str = "chi_plus") -> KineticDensity:
    vals = _values(u)
    _check_range(vals, interval)
    lam, h = lambda_midpoints(interval, n_lambda)
    return KineticDensity(lambdas=lam, dlam=h, interval=tuple(map(float, interval)),
                          variant=variant, values=chi_values(vals, lam, variant))


def velocity_average(h: KineticDensity, rho: Callable) -> np.ndarray:
    """Midpoint rule for  int h(., lam) rho(lam) dlam."""
    w = np.asarray(rho(h.lambdas), dtype=float) * h.dlam
    return h.values @ w


def averaged(u, interval, rho: Callable, n_lambda: int = 256, variant: str = "chi_plus"):
    """velocity_average(chi_density(u)) one snapshot at a time, without storing h."""
    vals = _values(u)
    _check_range(vals, interval)
    lam, h = lambda_midpoints(interval, n_lambda)
    w = np.asarray(rho(lam), dtype=float) * h
    out = np.empty_like(vals)
    for i in range(vals.shape[0]):
        out[i] = chi_values(vals[i], lam, variant) @ w
    return out


RHO = {
    "one": lambda lam: np.ones_like(lam),
    "poly2": lambda lam: 2.0 * lam,
    # C^1 bump supported in (0, 1)
    "bump": lambda lam: np.where((lam > 0) & (lam < 1), (lam * (1 - lam)) ** 2 * 16.0, 0.0),
}


# -- dissipation ---------------------------------------------------------------

def central_gradient(u, dx, axes):
    return [(np.roll(u, -1, axis=a) - np.roll(u, 1, axis=a)) / (2.0 * dx) for a in axes]


@dataclass
class DissipationField:
    D: np.ndarray  # |sigma(u) grad u|^2
    V: np.ndarray  # div_x Sigma(u), leading axis = row index i

    def integral(self, dx: float, d: int) -> np.ndarray:
        """int D dx for each leading (time) index."""
        axes = tuple(range(self.D.ndim - d, self.D.ndim))
        return self.D.sum(axis=axes) * dx ** d


def dissipation_field(u, model: CoefficientModel, dx: float | None = None) -> DissipationField:
    """D = |sigma(u) grad u|^2 and V_i = sum_j d_j Sigma_ij(u), central differences.

    ``u`` is a SolutionField or an array whose trailing ``model.d`` axes are
    the periodic spatial grid.
    """
    vals = _values(u)
    if dx is None:
        dx = u.grid.dx
    d = model.d
    axes = tuple(range(vals.ndim - d, vals.ndim))
    grads = central_gradient(vals, dx, axes)
    sig = model.sqrt_diffusion(vals)
    flux = np.zeros((d,) + vals.shape)
    for i in range(d):
        for j in range(d):
            flux[i] += sig[..., i, j] * grads[j]
    D = np.sum(flux * flux, axis=0)
    S = model.sigma_primitive(vals)
    V = np.zeros((d,) + vals.shape)
    for i in range(d):
        for j, ax in enumerate(axes):
            Sij = S[..., i, j]
            V[i] += (np.roll(Sij, -1, axis=ax) - np.roll(Sij, 1, axis=ax)) / (2.0 * dx)
    return DissipationField(D=D, V=V)


def weighted_sigma_primitive(model: CoefficientModel, psi: Callable, n: int = 8193):
    """lam -> int_0^lam sqrt(psi(s)) sigma(s) ds, tabulated and linearly interpolated."""
    lo, hi = model.interval
    grid = np.linspace(min(lo, 0.0), max(hi, 0.0), n)
    integrand = np.sqrt(np.clip(psi(grid), 0.0, None))[:, None, None] * model.sqrt_diffusion(grid)
    cum = cumulative_trapezoid(integrand, grid, axis=0, initial=0.0)
    cum -= np.stack([[np.interp(0.0, grid, cum[:, i, j]) for j in range(model.d)]
                     for i in range(model.d)])

    def prim(lam):
        lam = np.asarray(lam, dtype=float)
        out = np.empty(lam.shape + (model.d, model.d))
        for i in range(model.d):
            for j in range(model.d):
                out[..., i, j] = np.interp(lam, grid, cum[:, i, j])
        return out

    return prim


def chain_rule_defect(u, model: CoefficientModel, psi: Callable, dx: float,
                      psi_primitive: Callable | None = None) -> float:
    """L1 norm of  div Sigma^psi(u) - sqrt(psi(u)) div Sigma(u)  on the grid."""
    vals = np.asarray(u, dtype=float)
    d = model.d
    axes = tuple(range(vals.ndim - d, vals.ndim))
    prim = psi_primitive or weighted_sigma_primitive(model, psi)
    Sp = prim(vals)
    V = dissipation_field(vals, model, dx).V
    total = 0.0
    for i in range(d):
        lhs = np.zeros_like(vals)
        for j, ax in enumerate(axes):
            lhs += (np.roll(Sp[..., i, j], -1, axis=ax) - np.roll(Sp[..., i, j], 1, axis=ax)) / (2.0 * dx)
        total += float(np.sum(np.abs(lhs - np.sqrt(np.clip(psi(vals), 0, None)) * V[i])))
    return total * dx ** d
