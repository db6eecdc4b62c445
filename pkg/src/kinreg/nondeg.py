"""Degenerate-set measurement, fitting of the non-degeneracy exponent, and
the closed-form regularity exponents it feeds."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .coeffs import CoefficientModel, _check_unit, combine_symbol, symbol_parts
from .errors import DomainError, InputValidationError

MIN_FIT_POINTS = 4
MIN_R2 = 0.9


def lambda_midpoints(model: CoefficientModel, n: int) -> np.ndarray:
    lo, hi = model.interval
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


def measure_degenerate_set(model: CoefficientModel, xi, delta: float,
                           lambda_grid: int = 4096, variant: str = "squared") -> float:
    """Lebesgue measure of {lam in I : symbol(xi, lam) <= delta}, by midpoint counting."""
    xi = _check_unit(xi, model.d)
    if not delta > 0:
        raise InputValidationError("delta must be positive")
    if lambda_grid < 256:
        raise InputValidationError("lambda_grid must be >= 256")
    lam = lambda_midpoints(model, lambda_grid)
    hyper, para = symbol_parts(model, xi, lam)
    count = int(np.count_nonzero(combine_symbol(hyper, para, variant) <= delta))
    return count * model.length / lambda_grid


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic near-uniform points on the unit sphere in R^dim plus +-axes.

    Circle: equispaced angles.  2-sphere: Fibonacci lattice.  Higher: a
    scrambled Halton sequence pushed through the Gaussian quantile and
    normalised (the only case in which ``seed`` matters).
    """
    if dim == 1:
        pts = np.array([[1.0]])
    elif dim == 2:
        ang = 2 * np.pi * (np.arange(count) + 0.5) / count
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif dim == 3:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - np.sqrt(5.0)) * k
        pts = np.stack([z, r * np.cos(phi), r * np.sin(phi)], axis=1)
    else:
        from scipy.stats import norm

        u = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
        g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    axes = np.concatenate([np.eye(dim), -np.eye(dim)])
    return np.concatenate([pts, axes])


@dataclass
class DegeneracyFit:
    alpha: float | None
    delta_grid: np.ndarray
    sup_measures: np.ndarray
    r_squared: float | None
    sphere_samples: int
    lambda_grid: int
    degenerate_flag: bool
    intercept: float | None = None
    reliable: bool = False
    variant: str = "squared"

    def summary(self) -> str:
        a = "nan" if self.alpha is None else f"{self.alpha:.6f}"
        r2 = "nan" if self.r_squared is None else f"{self.r_squared:.6f}"
        return f"alpha={a} r2={r2} flag={str(self.degenerate_flag).lower()}"


def loglog_fit(x, y):
    """OLS of log y on log x; returns (slope, intercept, r^2)."""
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def sup_measures(model, points, deltas, lambda_grid, variant="squared"):
    """For each delta, the largest degenerate-set measure over ``points``."""
    lam = lambda_midpoints(model, lambda_grid)
    out = np.zeros(len(deltas))
    # chunk over directions to bound memory
    for start in range(0, len(points), 128):
        hyper, para = symbol_parts(model, points[start:start + 128], lam)
        vals = np.sort(combine_symbol(hyper, para, variant), axis=1)
        counts = np.stack([np.searchsorted(row, deltas, side="right") for row in vals])
        out = np.maximum(out, counts.max(axis=0))
    return out * model.length / lambda_grid


def estimate_alpha(model: CoefficientModel, sphere_samples: int = 256,
                   delta_range: tuple[float, float] = (1e-4, 1e-1), delta_points: int = 12,
                   lambda_grid: int = 4096, seed: int = 0, variant: str = "squared") -> DegeneracyFit:
    """Fit log sup_xi meas{symbol <= delta} ~ alpha log delta + c.

    The supremum runs over a deterministic sample of the unit sphere in
    R^{d+1}, so it is a lower bound on the true supremum.  Deltas with zero
    measure are dropped before the fit.
    """
    dmin, dmax = map(float, delta_range)
    if not (0 < dmin < dmax <= 1):
        raise InputValidationError("need 0 < delta_min < delta_max <= 1")
    if sphere_samples < 64:
        raise InputValidationError("sphere_samples must be >= 64")
    if delta_points < 6:
        raise InputValidationError("delta_points must be >= 6")
    if lambda_grid < 256:
        raise InputValidationError("lambda_grid must be >= 256")

    deltas = np.geomspace(dmin, dmax, delta_points)
    pts = sphere_points(model.d + 1, sphere_samples, seed)
    sup = sup_measures(model, pts, deltas, lambda_grid, variant)

    fit = DegeneracyFit(alpha=None, delta_grid=deltas, sup_measures=sup, r_squared=None,
                        sphere_samples=sphere_samples, lambda_grid=lambda_grid,
                        degenerate_flag=bool(np.all(sup == 0)), variant=variant)
    pos = sup > 0
    if fit.degenerate_flag or pos.sum() < MIN_FIT_POINTS:
        return fit
    slope, intercept, r2 = loglog_fit(deltas[pos], sup[pos])
    fit.alpha, fit.intercept, fit.r_squared = slope, intercept, r2
    fit.reliable = r2 >= MIN_R2
    if not fit.reliable:
        warnings.warn(f"non-degeneracy fit quality r2={r2:.3f} below {MIN_R2}", RuntimeWarning)
    return fit


# -- exponents --------------------------------------------------------------

def as_rational(x, max_den: int = 10_000):
    """Exact Fraction for ints/Fractions/'p/q' strings and for floats that a
    small-denominator fraction reproduces bit-for-bit; otherwise the float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            return float(x)
    x = float(x)
    if not math.isfinite(x):
        return x
    fr = Fraction(x).limit_denominator(max_den)
    return fr if float(fr) == x else x


@dataclass(frozen=True)
class ExponentPair:
    q_star: Fraction | float
    s_star: Fraction | float
    alpha: Fraction | float
    d: int
    deterministic: bool

    @property
    def two_s_star(self):
        return 2 * self.s_star

    @property
    def s_limit(self):
        """Regularity threshold: 2 s* without noise, s* otherwise."""
        return self.two_s_star if self.deterministic else self.s_star

    def format(self) -> str:
        return (f"q_star={_fmt(self.q_star)} (≈{float(self.q_star):.6f}) "
                f"s_star={_fmt(self.s_star)} two_s_star={_fmt(self.two_s_star)}")


def _fmt(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else f"{v.numerator}"
    return f"{v:.6f}"


def exponents(alpha, d: int, deterministic: bool = False) -> ExponentPair:
    """q* = (alpha + 2(d+4)) / (alpha + d + 4),  s* = alpha / (6 alpha + 12(d+4)).

    Rational input gives exact Fractions.
    """
    a = as_rational(alpha)
    if not a > 0:
        raise DomainError("alpha must be positive")
    if int(d) != d or d < 1:
        raise DomainError("d must be a positive integer")
    D = int(d) + 4
    q = (a + 2 * D) / (a + D)
    s = a / (6 * a + 12 * D)
    return ExponentPair(q_star=q, s_star=s, alpha=a, d=int(d), deterministic=bool(deterministic))


def theory_alpha_powerlaw(l: int, n: int, variant: str = "squared") -> Fraction:
    """min{1/(2l), 1/n}; the unsquared-flux variant gives min{1/l, 1/n}."""
    hyper = Fraction(1, 2 * l) if variant == "squared" else Fraction(1, l)
    return min(hyper, Fraction(1, n))
