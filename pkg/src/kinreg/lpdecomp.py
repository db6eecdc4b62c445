"""Dyadic partition of unity, symbol cutoffs, and Fourier annulus filters."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coeffs import CoefficientModel, symbol_parts
from .errors import DomainError, InputValidationError, RangeError


@lru_cache(maxsize=None)
def _smoothstep_coeffs(m: int) -> np.ndarray:
    # S(t) = t^{m+1} * sum_k c_k t^k with m vanishing derivatives at both ends
    k = np.arange(m + 1)
    binom = np.array([math.comb(m + j, j) * math.comb(2 * m + 1, m - j) for j in k], dtype=float)
    return binom * (-1.0) ** k


def smoothstep(t, order: int):
    """C^order polynomial ramp: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    c = _smoothstep_coeffs(order)
    poly = np.zeros_like(t)
    for ck in c[::-1]:
        poly = poly * t + ck
    # clip round-off so that 0 <= Phi, Psi <= 1 hold exactly
    return np.clip(t ** (order + 1) * poly, 0.0, 1.0)


def cutoff_profile(z, order: int = 6):
    """Phi: 1 on |z| <= 1, 0 on |z| >= 2, monotone smooth ramp in between."""
    z = np.abs(np.asarray(z, dtype=float))
    return 1.0 - smoothstep(z - 1.0, order)


@dataclass(frozen=True)
class DyadicPartition:
    """Psi0(r) = Phi(r),  Psi(r) = Phi(r) - Phi(2r).

    The telescoping construction gives Psi0(r) + sum_{J<=K} Psi(2^-J r) =
    Phi(2^-K r) = 1 for r <= 2^K, with supp Psi in (1/2, 2).
    """

    J_max: int
    order: int = 6

    def psi0(self, r):
        return cutoff_profile(r, self.order)

    def psi(self, r):
        r = np.asarray(r, dtype=float)
        return cutoff_profile(r, self.order) - cutoff_profile(2.0 * r, self.order)

    def block(self, J: int, r):
        """Psi_J(|xi|), with J = 0 meaning the low-frequency block Psi0."""
        if J == 0:
            return self.psi0(r)
        return self.psi(np.asarray(r, dtype=float) * 2.0 ** (-J))

    def partition_eval(self, xi) -> np.ndarray:
        """Block weights [Psi0, Psi_1, ..., Psi_Jmax] at frequency xi."""
        r = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float))))
        if r > 2.0 ** (self.J_max - 1):
            raise RangeError(f"|xi|={r:g} beyond partition cap 2^{self.J_max - 1}")
        return np.array([self.block(J, r) for J in range(self.J_max + 1)])


def partition_eval(p: DyadicPartition, xi) -> np.ndarray:
    return p.partition_eval(xi)


@dataclass(frozen=True)
class CutoffFamily:
    epsilon: float
    r: float
    nu: float
    order: int = 6

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InputValidationError("epsilon must lie in (0, 1)")
        if not 0 < self.r < 1:
            raise InputValidationError("r must lie in (0, 1)")
        if self.r + self.epsilon > 1 + 1e-14:
            raise InputValidationError("need r + epsilon <= 1")
        if not 0 < self.nu < 0.5:
            raise InputValidationError("nu must lie in (0, 1/2)")

    @classmethod
    def stochastic(cls, nu: float = 0.45, order: int = 6) -> "CutoffFamily":
        return cls(epsilon=2.0 * nu / 3.0, r=1.0 - 2.0 * nu / 3.0, nu=nu, order=order)

    @classmethod
    def deterministic(cls, nu: float = 0.45, order: int = 6) -> "CutoffFamily":
        return cls(epsilon=2.0 / 3.0, r=1.0 / 3.0, nu=nu, order=order)

    @classmethod
    def preset(cls, name: str, nu: float = 0.45) -> "CutoffFamily":
        if name == "stochastic":
            return cls.stochastic(nu)
        if name == "deterministic":
            return cls.deterministic(nu)
        raise InputValidationError(f"unknown cutoff preset {name!r}")

    def phi(self, z):
        return cutoff_profile(z, self.order)

    def phi_J(self, J: int, para):
        """Phi(2^{eps J} <a xi~'|xi~'>) given the parabolic part."""
        return self.phi(2.0 ** (self.epsilon * J) * np.asarray(para, dtype=float))


def modified_symbol(model: CoefficientModel, cutoffs: CutoffFamily, J: int, xi, lam):
    """L_J = (xi0' + <f|xi~'>)^2 Phi_J + <a xi~'|xi~'> |xi|^(1-r),  xi' = xi/|xi|."""
    xi = np.asarray(xi, dtype=float)
    norm = np.linalg.norm(xi, axis=-1)
    if np.any(norm == 0):
        raise DomainError("modified symbol undefined at xi = 0")
    unit = xi / norm[..., None]
    hyper, para = symbol_parts(model, unit, lam)
    lam_nd = np.ndim(lam)
    scale = np.reshape(norm, np.shape(norm) + (1,) * lam_nd) ** (1.0 - cutoffs.r)
    out = hyper ** 2 * cutoffs.phi_J(J, para) + para * scale
    return float(out) if np.ndim(out) == 0 else out


# -- discrete annulus filters ----------------------------------------------

def wavenumber_radius(shape, axes=None):
    """|k| on the FFT grid over ``axes`` with integer (cycles per period) wavenumbers."""
    axes = tuple(range(len(shape))) if axes is None else tuple(axes)
    r2 = 0.0
    for ax in axes:
        n = shape[ax]
        k = np.fft.fftfreq(n, d=1.0 / n)
        sh = [1] * len(shape)
        sh[ax] = n
        r2 = r2 + k.reshape(sh) ** 2
    return np.sqrt(r2)


def grid_cap(shape, axes=None) -> int:
    """Smallest K with 2^K >= max |k|: blocks 0..K tile the whole grid."""
    axes = tuple(range(len(shape))) if axes is None else tuple(axes)
    kmax = math.sqrt(sum((shape[a] // 2) ** 2 for a in axes))
    return max(1, math.ceil(math.log2(kmax))) if kmax > 1 else 1


def _prepare(field, axes, periodic):
    field = np.asarray(field, dtype=float)
    axes = tuple(range(field.ndim)) if axes is None else tuple(a % field.ndim for a in axes)
    if periodic:
        return field, 0.0, axes, None
    mean = float(field.mean())
    shape = list(field.shape)
    pads = []
    for ax in axes:
        target = 1 << (shape[ax] - 1).bit_length()
        pads.append((ax, target - shape[ax]))
    padding = [(0, 0)] * field.ndim
    for ax, extra in pads:
        padding[ax] = (0, extra)
    return np.pad(field - mean, padding), mean, axes, field.shape


def block_filters(field, p: DyadicPartition, blocks=None, axes=None, periodic: bool = True):
    """Apply Psi_J(|k|) for every J in ``blocks`` (default 0..cap) with one forward FFT.

    Periodic fields are filtered as-is.  Otherwise the mean is removed and
    the field zero-padded to the next power of two along each filtered
    axis; the mean is then carried by block 0 and outputs are cropped back.
    """
    work, mean, axes, orig = _prepare(field, axes, periodic)
    cap = grid_cap(work.shape, axes)
    blocks = list(range(cap + 1) if blocks is None else blocks)
    for J in blocks:
        if J < 0 or J > cap:
            raise RangeError(f"block {J} beyond grid range 0..{cap}")
        if J > p.J_max:
            raise RangeError(f"block {J} beyond partition cap {p.J_max}")
    spec = np.fft.fftn(work, axes=axes)
    rad = wavenumber_radius(work.shape, axes)
    out = {}
    for J in blocks:
        filt = np.fft.ifftn(spec * p.block(J, rad), axes=axes).real
        if orig is not None:
            filt = filt[tuple(slice(0, s) for s in orig)]
            if J == 0:
                filt = filt + mean
        out[J] = filt
    return out


def lp_block_filter(field, p: DyadicPartition, J: int, axes=None, periodic: bool = True):
    """Delta_J u: inverse transform of Psi_J(|k|) times the transform of u."""
    return block_filters(field, p, [J], axes=axes, periodic=periodic)[J]


def partition_for(shape, axes=None, order: int = 6) -> DyadicPartition:
    return DyadicPartition(J_max=grid_cap(shape, axes) + 1, order=order)
