"""Truncated cylindrical Wiener forcing  B(u) dW = sum_l b_l(x, u) dW_l.

The coefficients factor as b_l(x, lam) = alpha_l g_l(x) psi(lam).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputValidationError, ShapeError


# -- state profiles psi ------------------------------------------------------

def _psi_bounded_linear(lam):
    lam = np.asarray(lam, dtype=float)
    return lam / np.sqrt(1.0 + lam * lam)


def _dpsi_bounded_linear(lam):
    lam = np.asarray(lam, dtype=float)
    return (1.0 + lam * lam) ** -1.5


PSI_PROFILES = {
    "bounded_linear": (_psi_bounded_linear, _dpsi_bounded_linear),
    "constant": (lambda lam: np.ones_like(np.asarray(lam, dtype=float)),
                 lambda lam: np.zeros_like(np.asarray(lam, dtype=float))),
    "zero": (lambda lam: np.zeros_like(np.asarray(lam, dtype=float)),
             lambda lam: np.zeros_like(np.asarray(lam, dtype=float))),
}


# -- spatial profiles g_l ------------------------------------------------------

@dataclass(frozen=True)
class FourierProfile:
    """Scaled trigonometric mode on the periodic box [-X, X]^d.

    ``kind`` is 'const', 'cos' or 'sin'.  The amplitude 1/max(1, |omega|)
    keeps both |g| and |grad g| at most 1.
    """

    wavevector: tuple[int, ...]
    kind: str
    half_width: float

    @property
    def omega(self) -> np.ndarray:
        return np.pi * np.asarray(self.wavevector, dtype=float) / self.half_width

    @property
    def amplitude(self) -> float:
        return 1.0 / max(1.0, float(np.linalg.norm(self.omega)))

    def _phase(self, coords):
        mesh = np.meshgrid(*coords, indexing="ij")
        return sum(w * c for w, c in zip(self.omega, mesh))

    def value(self, coords):
        shape = tuple(len(c) for c in coords)
        if self.kind == "const":
            return np.ones(shape)
        ph = self._phase(coords)
        return self.amplitude * (np.cos(ph) if self.kind == "cos" else np.sin(ph))

    def gradient(self, coords):
        shape = tuple(len(c) for c in coords)
        if self.kind == "const":
            return np.zeros((len(coords),) + shape)
        ph = self._phase(coords)
        base = -np.sin(ph) if self.kind == "cos" else np.cos(ph)
        return np.stack([self.amplitude * w * base for w in self.omega])


def fourier_profiles(count: int, d: int, half_width: float) -> list[FourierProfile]:
    """Constant mode first, then cos/sin pairs ordered by |k| (half-space representatives)."""
    out: list[FourierProfile] = []
    if count <= 0:
        return out
    out.append(FourierProfile((0,) * d, "const", half_width))
    radius = 1
    while len(out) < count:
        rng = range(-radius, radius + 1)
        ks = [k for k in itertools.product(rng, repeat=d)
              if max(abs(c) for c in k) == radius and _positive_half(k)]
        ks.sort(key=lambda k: (sum(c * c for c in k), [-c for c in k]))
        for k in ks:
            for kind in ("cos", "sin"):
                if len(out) < count:
                    out.append(FourierProfile(tuple(k), kind, half_width))
        radius += 1
    return out


def _positive_half(k):
    for c in k:
        if c != 0:
            return c > 0
    return False


# -- noise model ------------------------------------------------------------

@dataclass
class NoiseModel:
    modes: int = 16
    amplitudes: np.ndarray | None = None
    psi: str | tuple[Callable, Callable] = "bounded_linear"
    d: int = 1
    half_width: float = 1.0
    seed: int = 0
    profiles: Sequence | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.modes < 0:
            raise InputValidationError("noise mode count must be >= 0")
        if self.amplitudes is None:
            self.amplitudes = 2.0 ** -np.arange(1, self.modes + 1, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.amplitudes.shape != (self.modes,) or np.any(self.amplitudes <= 0):
            raise InputValidationError("need one positive amplitude per mode")
        if self.profiles is None:
            self.profiles = fourier_profiles(self.modes, self.d, self.half_width)
        if len(self.profiles) != self.modes:
            raise InputValidationError("need one spatial profile per mode")
        if isinstance(self.psi, str):
            if self.psi not in PSI_PROFILES:
                raise InputValidationError(f"unknown psi profile {self.psi!r}")
            self._psi, self._dpsi = PSI_PROFILES[self.psi]
        else:
            self._psi, self._dpsi = self.psi

    @property
    def deterministic(self) -> bool:
        return self.modes == 0

    @property
    def truncation_tail(self) -> float:
        """Sum of alpha_l^2 over the discarded modes l > L for the default 2^-l decay."""
        return 4.0 ** -self.modes / 3.0

    def psi_value(self, lam):
        return self._psi(lam)

    def psi_derivative(self, lam):
        return self._dpsi(lam)

    def profile_values(self, coords) -> np.ndarray:
        """g_l on the tensor grid ``coords``; shape (L, *grid)."""
        key = tuple((len(c), float(c[0]), float(c[-1])) for c in coords)
        if key not in self._cache:
            shape = tuple(len(c) for c in coords)
            if self.modes == 0:
                vals = np.zeros((0,) + shape)
            else:
                vals = np.stack([g.value(coords) for g in self.profiles])
            self._cache[key] = vals
        return self._cache[key]

    def profile_gradients(self, coords) -> np.ndarray:
        shape = tuple(len(c) for c in coords)
        if self.modes == 0:
            return np.zeros((0, len(coords)) + shape)
        return np.stack([g.gradient(coords) for g in self.profiles])

    def coefficients(self, coords, u):
        """b_l(x, u(x)) for every mode; shape (L, *grid)."""
        g = self.profile_values(coords)
        return self.amplitudes.reshape((-1,) + (1,) * (g.ndim - 1)) * g * self._psi(u)

    def B2(self, coords, lam):
        """sum_l b_l(x, lam)^2 for scalar or grid-shaped lam."""
        g = self.profile_values(coords)
        a2 = (self.amplitudes ** 2).reshape((-1,) + (1,) * (g.ndim - 1))
        return np.sum(a2 * g * g, axis=0) * self._psi(lam) ** 2

    def dB2(self, coords, lam):
        g = self.profile_values(coords)
        a2 = (self.amplitudes ** 2).reshape((-1,) + (1,) * (g.ndim - 1))
        return np.sum(a2 * g * g, axis=0) * self._dpsi(lam) ** 2


@dataclass
class NoiseAudit:
    max_coefficient_ratio: float  # max_l sup (|b_l(.,0)| + |grad_x b_l| + |d_lam b_l|) / alpha_l
    growth_constant: float  # sup B^2 / (1 + lam^2)
    derivative_bound: float  # sup (d_lam B)^2
    alpha_sq_sum: float
    passed: bool


def validate_noise(nm: NoiseModel, coords, lambdas=None) -> NoiseAudit:
    """Check the three coefficient bounds on an (x, lam) sample grid."""
    lambdas = np.linspace(-4.0, 4.0, 81) if lambdas is None else np.asarray(lambdas, dtype=float)
    s2 = float(np.sum(nm.amplitudes ** 2))
    if nm.modes == 0:
        return NoiseAudit(0.0, 0.0, 0.0, 0.0, True)
    g = nm.profile_values(coords)
    grad = np.linalg.norm(nm.profile_gradients(coords), axis=1)
    psi = nm.psi_value(lambdas)
    dpsi = nm.psi_derivative(lambdas)
    psi0 = abs(float(nm.psi_value(np.array(0.0))))
    ratio = 0.0
    for l in range(nm.modes):
        per = (psi0 * np.abs(g[l]).max() + grad[l].max() * np.abs(psi).max()
               + np.abs(g[l]).max() * np.abs(dpsi).max())
        ratio = max(ratio, float(per))
    gmax2 = np.sum((nm.amplitudes ** 2)[:, None] * (g.reshape(nm.modes, -1) ** 2), axis=0).max()
    growth = float(np.max(gmax2 * psi ** 2 / (1.0 + lambdas ** 2)))
    dbound = float(gmax2 * np.max(dpsi ** 2))
    passed = ratio <= 3.0 + 1e-12 and growth <= s2 + 1e-12 and dbound <= s2 + 1e-12
    return NoiseAudit(ratio, growth, dbound, s2, passed)


# -- Wiener paths -------------------------------------------------------------

@dataclass
class WienerPath:
    times: np.ndarray  # (M+1,)
    increments: np.ndarray  # (M, L)
    seed: int
    path_id: int = 0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def modes(self) -> int:
        return self.increments.shape[1]

    def values(self) -> np.ndarray:
        """W_l(t_m); shape (M+1, L)."""
        return np.concatenate([np.zeros((1, self.modes)), np.cumsum(self.increments, axis=0)])


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by (seed, path_id)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(path_id)])))


def wiener_path(modes: int, T: float, steps: int, seed: int = 0, path_id: int = 0) -> WienerPath:
    """Independent N(0, dt) increments; row m, column l is dW_l on [t_m, t_{m+1}]."""
    if steps < 1:
        raise InputValidationError("need at least one time step")
    dt = T / steps
    times = np.linspace(0.0, T, steps + 1)
    inc = path_rng(seed, path_id).standard_normal((steps, modes)) * np.sqrt(dt)
    return WienerPath(times=times, increments=inc, seed=int(seed), path_id=int(path_id))


def noise_increment(nm: NoiseModel, path: WienerPath, m: int, u, coords) -> np.ndarray:
    """sum_l b_l(x, u(x)) dW_l^m, with u taken at the start of the step."""
    u = np.asarray(u, dtype=float)
    shape = tuple(len(c) for c in coords)
    if u.shape != shape:
        raise ShapeError(f"state shape {u.shape} does not match noise grid {shape}")
    if nm.modes == 0:
        return np.zeros_like(u)
    if path.modes != nm.modes:
        raise ShapeError(f"path has {path.modes} modes, model has {nm.modes}")
    g = nm.profile_values(coords)
    weights = nm.amplitudes * path.increments[m]
    return np.tensordot(weights, g, axes=(0, 0)) * nm.psi_value(u)


def ito_integral_path(nm: NoiseModel | None, path: WienerPath, integrand) -> np.ndarray:
    """Left-point Ito sums  I(t_m) = sum_{k<m} sum_l Phi_l(t_k) dW_l^k.

    ``integrand`` is a scalar, an array of shape (M, L, ...) (or broadcastable
    to it), or a callable ``(m, t_m, I_m) -> array (L, ...)`` that only sees
    the state before increment m.  Returns an array of shape (M+1, ...).
    """
    if nm is not None and nm.modes != path.modes:
        raise ShapeError(f"path has {path.modes} modes, model has {nm.modes}")
    M, L = path.increments.shape
    if callable(integrand):
        first = np.asarray(integrand(0, path.times[0], 0.0), dtype=float)
        fshape = np.broadcast_shapes(first.shape, (L,))[1:] if first.ndim else ()
        out = np.zeros((M + 1,) + fshape)
        for m in range(M):
            phi = first if m == 0 else np.asarray(integrand(m, path.times[m], out[m]), dtype=float)
            phi = np.broadcast_to(phi, (L,) + fshape)
            out[m + 1] = out[m] + np.tensordot(path.increments[m], phi, axes=(0, 0))
        return out
    phi = np.asarray(integrand, dtype=float)
    if phi.ndim < 2:
        phi = np.broadcast_to(phi, (M, L))
    try:
        phi = np.broadcast_to(phi, (M, L) + phi.shape[2:])
    except ValueError as exc:
        raise ShapeError(f"integrand shape {phi.shape} incompatible with ({M}, {L})") from exc
    dw = path.increments.reshape((M, L) + (1,) * (phi.ndim - 2))
    steps = np.sum(phi * dw, axis=1)
    return np.concatenate([np.zeros((1,) + steps.shape[1:]), np.cumsum(steps, axis=0)])
