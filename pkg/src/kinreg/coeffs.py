"""Coefficient models for  du + div F(u) dt = div(a(u) grad u) dt + B(u) dW.

Every coefficient function is vectorised over the state variable: given an
array ``lam`` of shape S it returns shape ``S + (d,)`` (vectors) or
``S + (d, d)`` (matrices).  Naming: ``flux`` is the wave-speed vector
f = F', ``flux_primitive`` is F itself, ``diffusion`` is a, ``sqrt_diffusion``
its symmetric square root and the two ``*_primitive`` fields are the
antiderivatives of a and of the square root, both anchored at 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from ._quad import adaptive_simpson
from .errors import DomainError, InputValidationError

Array = np.ndarray

PSD_TOL = 1e-10
SQRT_TOL = 1e-8
PRIMITIVE_RTOL = 1e-6


@dataclass(frozen=True)
class CoefficientModel:
    d: int
    flux: Callable[[Array], Array]
    flux_primitive: Callable[[Array], Array]
    diffusion: Callable[[Array], Array]
    sqrt_diffusion: Callable[[Array], Array]
    diffusion_primitive: Callable[[Array], Array]
    sigma_primitive: Callable[[Array], Array]
    interval: tuple[float, float]
    name: str = "custom"
    # Per-axis bound on |f_k| over [lo, hi] (elementwise arrays).  None means
    # the global bound over the state interval is used instead.
    wave_speed: Callable[[Array, Array], Array] | None = field(default=None, compare=False)
    params: dict = field(default_factory=dict, compare=False)
    # lambda values where the coefficients have kinks (table nodes)
    breakpoints: tuple = field(default=(), compare=False)

    def __post_init__(self):
        lo, hi = self.interval
        if not hi > lo:
            raise InputValidationError(f"empty state interval {self.interval}")
        if self.d < 1:
            raise InputValidationError("dimension must be positive")

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def with_interval(self, lo: float, hi: float) -> "CoefficientModel":
        from dataclasses import replace

        return replace(self, interval=(float(lo), float(hi)))

    def lambda_grid(self, n: int) -> Array:
        lo, hi = self.interval
        return np.linspace(lo, hi, n)

    def max_flux_speed(self, n: int = 2049) -> float:
        """max over I of sum_k |f_k|."""
        f = self.flux(self.lambda_grid(n))
        return float(np.max(np.sum(np.abs(f), axis=-1)))

    def max_diffusion(self, n: int = 2049) -> float:
        """max over I of the spectral norm of a."""
        a = self.diffusion(self.lambda_grid(n))
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))

    def axis_speeds(self, lo: Array, hi: Array) -> Array:
        """Upper bound of |f_k| on [lo, hi] for each axis k (shape lo.shape + (d,))."""
        if self.wave_speed is not None:
            return self.wave_speed(lo, hi)
        bound = np.max(np.abs(self.flux(self.lambda_grid(2049))), axis=0)
        return np.broadcast_to(bound, np.shape(lo) + (self.d,))


# -- built-in families ------------------------------------------------------

def _vec(lam, *components):
    return np.stack(np.broadcast_arrays(*components), axis=-1)


def _diag(lam, *entries):
    lam = np.asarray(lam, dtype=float)
    d = len(entries)
    out = np.zeros(lam.shape + (d, d))
    for i, e in enumerate(entries):
        out[..., i, i] = e
    return out


def _abs_pow(lam, p):
    # |lam|**p with the value at 0 fixed to 0 (also for fractional p)
    lam = np.abs(np.asarray(lam, dtype=float))
    if p == 0:
        return np.ones_like(lam)
    return np.where(lam == 0.0, 0.0, lam ** p)


def powerlaw(l: int, n: int, M: float = 1.0) -> CoefficientModel:
    """The 2-D example  u_t + (u^{l+1}/(l+1))_{y1} = (|u|^n u/(n+1))_{y2 y2}.

    This is the rotated form (y1 = x1 + x2, y2 = x1 - x2) of the mixed
    convection-diffusion example; f = (lam^l, 0) and a = diag(0, |lam|^n).
    """
    l, n = int(l), int(n)
    if l < 1 or n < 1:
        raise InputValidationError("powerlaw exponents l, n must be >= 1")
    zero = lambda lam: np.zeros_like(np.asarray(lam, dtype=float))

    def flux(lam):
        lam = np.asarray(lam, dtype=float)
        return _vec(lam, lam ** l, zero(lam))

    def flux_primitive(lam):
        lam = np.asarray(lam, dtype=float)
        return _vec(lam, lam ** (l + 1) / (l + 1), zero(lam))

    def diffusion(lam):
        return _diag(lam, zero(lam), _abs_pow(lam, n))

    def sqrt_diffusion(lam):
        return _diag(lam, zero(lam), _abs_pow(lam, n / 2))

    def diffusion_primitive(lam):
        lam = np.asarray(lam, dtype=float)
        return _diag(lam, zero(lam), _abs_pow(lam, n) * lam / (n + 1))

    def sigma_primitive(lam):
        lam = np.asarray(lam, dtype=float)
        return _diag(lam, zero(lam), _abs_pow(lam, n / 2) * lam / (n / 2 + 1))

    def wave_speed(lo, hi):
        # |lam|^l is maximised at an endpoint of any interval
        s = np.maximum(np.abs(lo), np.abs(hi)) ** l
        return np.stack([s, np.zeros_like(s)], axis=-1)

    return CoefficientModel(
        d=2, flux=flux, flux_primitive=flux_primitive, diffusion=diffusion,
        sqrt_diffusion=sqrt_diffusion, diffusion_primitive=diffusion_primitive,
        sigma_primitive=sigma_primitive, interval=(-float(M), float(M)),
        name=f"powerlaw(l={l},n={n})", wave_speed=wave_speed,
        params={"family": "powerlaw", "l": l, "n": n},
    )


def burgers(M: float = 1.0) -> CoefficientModel:
    def flux(lam):
        return np.asarray(lam, dtype=float)[..., None]

    def flux_primitive(lam):
        return 0.5 * np.asarray(lam, dtype=float)[..., None] ** 2

    def zero_mat(lam):
        return np.zeros(np.shape(lam) + (1, 1))

    def wave_speed(lo, hi):
        return np.maximum(np.abs(lo), np.abs(hi))[..., None]

    return CoefficientModel(
        d=1, flux=flux, flux_primitive=flux_primitive, diffusion=zero_mat,
        sqrt_diffusion=zero_mat, diffusion_primitive=zero_mat, sigma_primitive=zero_mat,
        interval=(-float(M), float(M)), name="burgers", wave_speed=wave_speed,
        params={"family": "burgers"},
    )


def heat(c: float = 1.0, d: int = 1, M: float = 1.0) -> CoefficientModel:
    c = float(c)
    if c < 0:
        raise InputValidationError("heat coefficient c must be nonnegative")
    eye = np.eye(d)
    rc = np.sqrt(c)

    def zero_vec(lam):
        return np.zeros(np.shape(lam) + (d,))

    def const(lam, v):
        return np.asarray(lam, dtype=float)[..., None, None] * 0.0 + v * eye

    def lin(lam, v):
        return np.asarray(lam, dtype=float)[..., None, None] * (v * eye)

    return CoefficientModel(
        d=d, flux=zero_vec, flux_primitive=zero_vec,
        diffusion=lambda lam: const(lam, c), sqrt_diffusion=lambda lam: const(lam, rc),
        diffusion_primitive=lambda lam: lin(lam, c), sigma_primitive=lambda lam: lin(lam, rc),
        interval=(-float(M), float(M)), name=f"heat(c={c})",
        wave_speed=lambda lo, hi: np.zeros(np.shape(lo) + (d,)),
        params={"family": "heat", "c": c, "d": d},
    )


def _sqrtm_psd(a):
    w, v = np.linalg.eigh(a)
    w = np.sqrt(np.clip(w, 0.0, None))
    return np.einsum("...ik,...k,...jk->...ij", v, w, v)


def tabulated(lam, f, a, interval=None, name="table") -> CoefficientModel:
    """Model from tabulated f(lam) (n, d) and a(lam) (n, d, d), linearly interpolated.

    The square root is taken pointwise, so sigma @ sigma == a holds exactly
    between nodes.  Primitives of f and a are exact (piecewise quadratic);
    the primitive of sigma uses adaptive Simpson quadrature.
    """
    lam = np.asarray(lam, dtype=float)
    f = np.asarray(f, dtype=float)
    a = np.asarray(a, dtype=float)
    if lam.ndim != 1 or lam.size < 2 or np.any(np.diff(lam) <= 0):
        raise InputValidationError("table lambda column must be strictly increasing")
    if f.ndim == 1:
        f = f[:, None]
    d = f.shape[1]
    a = a.reshape(lam.size, d, d)
    lo, hi = (lam[0], lam[-1]) if interval is None else interval

    def interp(lam_q, table):
        lam_q = np.asarray(lam_q, dtype=float)
        flat = table.reshape(lam.size, -1)
        cols = [np.interp(lam_q, lam, flat[:, k]) for k in range(flat.shape[1])]
        return np.stack(cols, axis=-1).reshape(lam_q.shape + table.shape[1:])

    def cell_primitive(table):
        # exact cumulative integral of a piecewise-linear table, anchored at 0
        steps = 0.5 * np.diff(lam)[(...,) + (None,) * (table.ndim - 1)] * (table[1:] + table[:-1])
        cum = np.concatenate([np.zeros((1,) + table.shape[1:]), np.cumsum(steps, axis=0)])

        def prim(lam_q):
            lam_q = np.asarray(lam_q, dtype=float)
            k = np.clip(np.searchsorted(lam, lam_q, side="right") - 1, 0, lam.size - 2)
            ext = (...,) + (None,) * (table.ndim - 1)
            dl = (lam_q - lam[k])[ext]
            return cum[k] + 0.5 * dl * (table[k] + interp(lam_q, table))

        offset = prim(np.array(0.0)) if lam[0] <= 0.0 <= lam[-1] else np.zeros(table.shape[1:])
        return lambda lam_q: prim(lam_q) - offset

    sigma = lambda lam_q: _sqrtm_psd(interp(lam_q, a))

    node_sigma = adaptive_simpson(sigma, lam[:-1], lam[1:], tol=1e-10)
    sig_cum = np.concatenate([np.zeros((1, d, d)), np.cumsum(node_sigma, axis=0)])

    def sigma_from_start(lam_q):
        lam_q = np.asarray(lam_q, dtype=float)
        flat = lam_q.ravel()
        k = np.clip(np.searchsorted(lam, flat, side="right") - 1, 0, lam.size - 2)
        part = adaptive_simpson(sigma, lam[k], flat, tol=1e-10) if flat.size else np.zeros((0, d, d))
        return (sig_cum[k] + part).reshape(lam_q.shape + (d, d))

    sig_offset = sigma_from_start(np.array(0.0)) if lam[0] <= 0.0 <= lam[-1] else np.zeros((d, d))

    gmax = np.max(np.abs(f), axis=0)
    return CoefficientModel(
        d=d,
        flux=lambda lam_q: interp(lam_q, f),
        flux_primitive=cell_primitive(f),
        diffusion=lambda lam_q: interp(lam_q, a),
        sqrt_diffusion=sigma,
        diffusion_primitive=cell_primitive(a),
        sigma_primitive=lambda lam_q: sigma_from_start(lam_q) - sig_offset,
        interval=(float(lo), float(hi)), name=name,
        wave_speed=lambda lo_, hi_: np.broadcast_to(gmax, np.shape(lo_) + (d,)),
        params={"family": "table"}, breakpoints=tuple(float(x) for x in lam),
    )


def load_table(path, interval=None) -> CoefficientModel:
    """Read a CSV with columns  lambda, f_1..f_d, a_11..a_dd  (header optional)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in rec])
            except ValueError:
                continue  # header
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise InputValidationError(f"{path}: need at least two numeric rows")
    ncol = data.shape[1] - 1
    d = next((k for k in range(1, 5) if k + k * k == ncol), None)
    if d is None:
        raise InputValidationError(f"{path}: {ncol + 1} columns do not match 1 + d + d^2")
    return tabulated(data[:, 0], data[:, 1:1 + d], data[:, 1 + d:].reshape(-1, d, d),
                     interval=interval, name=str(path))


# -- symbol -------------------------------------------------------------------

def _check_unit(xi, d):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (d + 1,):
        raise InputValidationError(f"frequency must have {d + 1} components, got shape {xi.shape}")
    if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
        raise InputValidationError(f"frequency must be a unit vector (|xi| = {np.linalg.norm(xi)!r})")
    return xi


def symbol_parts(model: CoefficientModel, xi: Array, lam: Array):
    """Hyperbolic part xi0 + <f|xi~> and parabolic part <a xi~|xi~>.

    ``xi`` has shape (..., d+1) and is not normalised here; ``lam`` is any
    array.  Results have shape ``xi.shape[:-1] + lam.shape``.
    """
    xi = np.asarray(xi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    f = model.flux(lam)
    a = model.diffusion(lam)
    xs = xi[..., 1:]
    bshape = xi.shape[:-1] + (1,) * lam.ndim
    hyper = xi[..., 0].reshape(bshape) + np.tensordot(xs, f, axes=([-1], [-1]))
    flat_xs = xs.reshape(-1, model.d)
    para = np.einsum("si,lij,sj->sl", flat_xs, a.reshape(-1, model.d, model.d), flat_xs)
    return hyper, para.reshape(xi.shape[:-1] + lam.shape)


def eval_symbol(model: CoefficientModel, xi, lam, variant: str = "squared"):
    """|xi0 + <f(lam)|xi~>|^2 + <a(lam) xi~|xi~> for a unit frequency xi = (xi0, xi~).

    ``variant="mixed"`` drops the square on the hyperbolic part.
    """
    xi = _check_unit(xi, model.d)
    lam_arr = np.asarray(lam, dtype=float)
    lo, hi = model.interval
    if np.any(lam_arr < lo) or np.any(lam_arr > hi) or not np.all(np.isfinite(lam_arr)):
        raise DomainError(f"lambda outside state interval [{lo}, {hi}]")
    hyper, para = symbol_parts(model, xi, lam_arr)
    out = combine_symbol(hyper, para, variant)
    return float(out) if np.ndim(out) == 0 else out


def combine_symbol(hyper, para, variant="squared"):
    if variant == "squared":
        return hyper * hyper + para
    if variant == "mixed":
        return np.abs(hyper) + para
    raise InputValidationError(f"unknown symbol variant {variant!r}")


# -- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    model: str
    grid_size: int
    max_psd_violation: float
    max_sqrt_residual: float
    max_primitive_mismatch: float
    worst_lambda: dict
    passed: bool

    def lines(self):
        return [
            f"model={self.model} grid={self.grid_size}",
            f"psd_violation={self.max_psd_violation:.3e} (tol {PSD_TOL:g})",
            f"sqrt_residual={self.max_sqrt_residual:.3e} (tol {SQRT_TOL:g})",
            f"primitive_mismatch={self.max_primitive_mismatch:.3e} (tol {PRIMITIVE_RTOL:g})",
            f"pass={self.passed}",
        ]


def validate_model(model: CoefficientModel, grid_size: int = 64) -> ValidationReport:
    """Numerically audit the structural assumptions on a uniform lambda grid.

    Checks that a is symmetric positive semidefinite, that sigma squares to
    a, and that the closed-form primitives agree with an independent
    quadrature (scipy ``quad_vec``) of a, sigma and f.
    """
    if grid_size < 16:
        raise InputValidationError("grid_size must be >= 16")
    lam = model.lambda_grid(grid_size)
    a = model.diffusion(lam)
    sig = model.sqrt_diffusion(lam)

    asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)), axis=(-1, -2))
    eig_min = np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, -1, -2))).min(axis=-1)
    psd_violation = np.maximum(np.maximum(-eig_min, 0.0), asym)
    sqrt_res = np.max(np.abs(sig @ sig - a), axis=(-1, -2))

    mismatch = 0.0
    worst = {}
    for label, prim, integrand in (
        ("diffusion_primitive", model.diffusion_primitive, model.diffusion),
        ("sigma_primitive", model.sigma_primitive, model.sqrt_diffusion),
        ("flux_primitive", model.flux_primitive, model.flux),
    ):
        closed = prim(lam)
        quad = _quad_from_zero(integrand, lam, model.breakpoints)
        scale = max(float(np.max(np.abs(quad))), 1e-12)
        err = np.max(np.abs(closed - quad).reshape(lam.size, -1), axis=1) / scale
        k = int(np.argmax(err))
        worst[label] = float(lam[k])
        mismatch = max(mismatch, float(err[k]))

    psd = float(psd_violation.max())
    sq = float(sqrt_res.max())
    worst["psd"] = float(lam[int(np.argmax(psd_violation))])
    worst["sqrt"] = float(lam[int(np.argmax(sqrt_res))])
    return ValidationReport(
        model=model.name, grid_size=grid_size, max_psd_violation=psd,
        max_sqrt_residual=sq, max_primitive_mismatch=mismatch, worst_lambda=worst,
        passed=psd <= PSD_TOL and sq <= SQRT_TOL and mismatch <= PRIMITIVE_RTOL,
    )


def _quad_from_zero(fn, xs, breakpoints=()):
    """int_0^x fn for every x in xs: quad_vec on each cell between
    consecutive nodes (xs, 0 and any kinks), then a running sum."""
    xs = np.asarray(xs, dtype=float)
    nodes = np.unique(np.concatenate([xs, [0.0], np.asarray(breakpoints, dtype=float)]))
    nodes = nodes[(nodes >= min(xs.min(), 0.0)) & (nodes <= max(xs.max(), 0.0))]
    cells = [integrate.quad_vec(lambda s: fn(np.array(s)), a, b, epsabs=1e-13, epsrel=1e-11)[0]
             for a, b in zip(nodes[:-1], nodes[1:])]
    zero = np.zeros(np.shape(fn(np.array(0.0))))
    cum = np.cumsum(np.stack([zero] + cells), axis=0)
    cum -= cum[np.searchsorted(nodes, 0.0)]
    return cum[np.searchsorted(nodes, xs)]


# -- weights ------------------------------------------------------------------

@dataclass(frozen=True)
class WeightFunction:
    """w_N(x) = (1 + |x|^2)^(-N); integrable on R^d when N > d/2."""

    N: float
    d: int

    @property
    def integrable(self) -> bool:
        return self.N > self.d / 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 + np.sum(x * x, axis=-1)) ** (-self.N)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r2 = 1.0 + np.sum(x * x, axis=-1, keepdims=True)
        return -2.0 * self.N * x * r2 ** (-self.N - 1)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        r2 = 1.0 + np.sum(x * x, axis=-1)[..., None, None]
        outer = x[..., :, None] * x[..., None, :]
        eye = np.eye(x.shape[-1])
        return (4.0 * self.N * (self.N + 1) * outer * r2 ** (-self.N - 2)
                - 2.0 * self.N * eye * r2 ** (-self.N - 1))

    def box_integral(self, half_width: float, n: int = 201) -> float:
        """Midpoint-rule integral of w_N over [-half_width, half_width]^d."""
        h = 2.0 * half_width / n
        axis = -half_width + h * (np.arange(n) + 0.5)
        mesh = np.stack(np.meshgrid(*([axis] * self.d), indexing="ij"), axis=-1)
        return float(np.sum(self(mesh)) * h ** self.d)

    def derivative_ratios(self, half_width: float = 10.0, n: int = 81, h: float = 1e-4):
        """Largest |d_i w| / w and |d_ij w| / w on a sample grid, by central differences."""
        axis = np.linspace(-half_width, half_width, n)
        pts = np.stack(np.meshgrid(*([axis] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)
        w = self(pts)
        eye = np.eye(self.d) * h
        first = max(np.max(np.abs(self(pts + e) - self(pts - e)) / (2 * h) / w) for e in eye)
        second = 0.0
        for i in range(self.d):
            for j in range(self.d):
                ei, ej = eye[i], eye[j]
                fd = (self(pts + ei + ej) - self(pts + ei - ej) - self(pts - ei + ej)
                      + self(pts - ei - ej)) / (4 * h * h)
                second = max(second, float(np.max(np.abs(fd) / w)))
        return float(first), second
