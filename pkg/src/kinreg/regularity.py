"""Fractional smoothness of gridded fields.

The main estimator reads the decay rate of Littlewood-Paley block norms,
||Delta_J u||_q ~ 2^(-s J); a direct Sobolev-Slobodetskii double sum serves
as a small-grid cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputValidationError, InsufficientResolution, RangeError
from .lpdecomp import DyadicPartition, wavenumber_radius
from .nondeg import loglog_fit

MIN_BLOCKS = 4
MIN_R2 = 0.8
FLOOR_REL = 1e-12


@dataclass
class RegularityReport:
    q: float
    blocks: list[int]
    block_norms: np.ndarray
    fit_window: tuple[int, int]
    fitted_s: float | None
    raw_slope: float | None
    r_squared: float | None
    predicted_s_star: float | None = None
    verdict: bool | None = None
    ceiling_hit: bool = False
    floor: float = 0.0
    mode: str = "field"
    paths: list = field(default_factory=list)

    @property
    def margin(self) -> float | None:
        if self.fitted_s is None or self.predicted_s_star is None:
            return None
        return self.fitted_s - float(self.predicted_s_star)

    def summary(self) -> str:
        s = "nan" if self.fitted_s is None else f"{self.fitted_s:.6f}"
        star = "nan" if self.predicted_s_star is None else f"{float(self.predicted_s_star):.6f}"
        return f"s_est={s} s_star={star} verdict={str(bool(self.verdict)).lower()}"


def _mirror(field, axes):
    for ax in axes:
        field = np.concatenate([field, np.flip(field, axis=ax)], axis=ax)
    return field


def block_norms(field, q: float = 2.0, axes=None, periodic=False, partition: DyadicPartition | None = None):
    """L^q norms (grid averages) of Delta_J u for the resolvable blocks J = 1..J_res.

    The field is mean-removed; non-periodic axes are extended by reflection
    so that the periodic transform sees no artificial jump.  Norms are taken
    over the original region only.  Returns (blocks, norms, field_norm).
    """
    u = np.asarray(field, dtype=float)
    if q < 1 or not math.isfinite(q):
        raise InputValidationError("q must lie in [1, inf)")
    axes = tuple(range(u.ndim)) if axes is None else tuple(a % u.ndim for a in axes)
    per = (periodic,) * len(axes) if isinstance(periodic, (bool, np.bool_)) else tuple(periodic)
    if len(per) != len(axes):
        raise InputValidationError("one periodic flag per filtered axis")
    u = u - u.mean()
    ext = _mirror(u, [ax for ax, p in zip(axes, per) if not p])
    nyq = min(ext.shape[ax] // 2 for ax in axes)
    if nyq < 2:
        raise InsufficientResolution("grid too small for any dyadic block")
    j_res = int(math.floor(math.log2(nyq)))
    if partition is None:
        partition = DyadicPartition(J_max=j_res + 2)
    if partition.J_max < j_res:
        raise RangeError(f"partition cap {partition.J_max} below resolvable block {j_res}")
    spec = np.fft.fftn(ext, axes=axes)
    rad = wavenumber_radius(ext.shape, axes)
    crop = tuple(slice(0, n) for n in u.shape)
    blocks = list(range(1, j_res + 1))
    norms = np.empty(len(blocks))
    for i, J in enumerate(blocks):
        w = partition.block(J, rad)
        filt = np.fft.ifftn(spec * w, axes=axes).real[crop]
        norms[i] = np.mean(np.abs(filt) ** q) ** (1.0 / q)
    unorm = float(np.mean(np.abs(u) ** q) ** (1.0 / q))
    return blocks, norms, unorm


def default_window(j_res: int) -> tuple[int, int]:
    """Drop the two lowest and two highest blocks, or one of each on short ranges."""
    if j_res - 4 >= MIN_BLOCKS:
        return 3, j_res - 2
    if j_res - 2 >= MIN_BLOCKS:
        return 2, j_res - 1
    raise InsufficientResolution(f"only {j_res} resolvable blocks; need {MIN_BLOCKS + 2}")


def fit_blocks(blocks, norms, q, field_norm, fit_window=None, s_star=None, mode="field") -> RegularityReport:
    blocks = list(blocks)
    norms = np.asarray(norms, dtype=float)
    lo, hi = default_window(blocks[-1]) if fit_window is None else map(int, fit_window)
    if lo < blocks[0] or hi > blocks[-1] or hi - lo + 1 < MIN_BLOCKS:
        raise InsufficientResolution(f"fit window ({lo}, {hi}) needs {MIN_BLOCKS} blocks within "
                                     f"{blocks[0]}..{blocks[-1]}")
    floor = FLOOR_REL * field_norm
    J = np.asarray(blocks)
    above = norms > floor
    inwin = (J >= lo) & (J <= hi)
    rep = RegularityReport(q=q, blocks=blocks, block_norms=norms, fit_window=(lo, hi),
                           fitted_s=None, raw_slope=None, r_squared=None,
                           predicted_s_star=s_star, floor=floor, mode=mode)
    if np.all(above[inwin]):
        slope, _, r2 = loglog_fit(2.0 ** J[inwin], norms[inwin])
        rep.raw_slope, rep.r_squared = -slope, r2
        if r2 >= MIN_R2:
            rep.fitted_s = -slope
    else:
        # spectrum reaches round-off inside the window: resolved smooth field
        if above.sum() < MIN_BLOCKS or not above[0]:
            raise InsufficientResolution(
                f"only {int(above.sum())} blocks above the round-off floor; field is band-limited")
        first_floor = int(np.argmin(above))
        if above[first_floor:].any() and not np.all(above[:first_floor]):
            raise InsufficientResolution("block norms are not a decaying spectrum")
        rep.ceiling_hit = True
        rep.raw_slope = math.log2(norms[0] / floor) / (J[first_floor] - J[0])
        rep.fitted_s = rep.raw_slope
    if s_star is not None:
        rep.verdict = rep.fitted_s is not None and rep.fitted_s >= float(s_star)
    return rep


def besov_slope(field, partition: DyadicPartition | None = None, q: float = 2.0, fit_window=None,
                axes=None, periodic=False, s_star=None) -> RegularityReport:
    """Fit -log2 ||Delta_J u||_q against J over the fit window."""
    blocks, norms, unorm = block_norms(field, q, axes, periodic, partition)
    return fit_blocks(blocks, norms, q, unorm, fit_window, s_star)


# -- solutions and ensembles ---------------------------------------------------

MODES = ("space", "time", "spacetime")


def _axes_for(mode, ndim):
    if mode == "space":
        return tuple(range(1, ndim)), True
    if mode == "time":
        return (0,), False
    if mode == "spacetime":
        return tuple(range(ndim)), (False,) + (True,) * (ndim - 1)
    raise InputValidationError(f"mode must be one of {MODES}")


def spacetime_regularity(solution, q: float, mode: str = "spacetime", s_star=None,
                         fit_window=None, partition=None, space_periodic: bool = True) -> RegularityReport:
    """Block-norm smoothness of u(t, x) along the chosen axes.

    ``solution`` is a SolutionField, an array (n_t, *space), or a list of
    either (an ensemble).  Time is never periodic.  For an ensemble the block
    norms are combined as (mean_paths ||Delta_J u||_q^q)^(1/q) before fitting;
    per-path reports are attached when they can be fitted.
    """
    members = solution if isinstance(solution, (list, tuple)) else [solution]
    arrays = [np.asarray(getattr(m, "snapshots", m), dtype=float) for m in members]
    axes, per = _axes_for(mode, arrays[0].ndim)
    if not space_periodic:
        per = False
    per_norms, field_norms = [], []
    for arr in arrays:
        if arr.shape[0] < 2 and mode != "space":
            raise InsufficientResolution("need at least two snapshots along time")
        blocks, norms, unorm = block_norms(arr, q, axes, per, partition)
        per_norms.append(norms)
        field_norms.append(unorm)
    agg = np.mean(np.stack(per_norms) ** q, axis=0) ** (1.0 / q)
    agg_field = float(np.mean(np.array(field_norms) ** q) ** (1.0 / q))
    rep = fit_blocks(blocks, agg, q, agg_field, fit_window, s_star, mode)
    if len(arrays) > 1:
        for norms, unorm in zip(per_norms, field_norms):
            try:
                rep.paths.append(fit_blocks(blocks, norms, q, unorm, rep.fit_window, s_star, mode))
            except InsufficientResolution:
                rep.paths.append(None)
    return rep


# -- direct seminorm --------------------------------------------------------------

MAX_POINTS = 2 ** 14


def slobodetskii_seminorm(field, s: float, q: float = 2.0, spacing=None) -> float:
    """( sum_{x != y} |u(x) - u(y)|^q / |x - y|^(D + s q) dV^2 )^(1/q).

    Quadratic cost; refuses grids with more than 2^14 points.  ``spacing``
    defaults to 1/n per axis (the unit cube).
    """
    u = np.asarray(field, dtype=float)
    if u.size > MAX_POINTS:
        raise RangeError(f"{u.size} points exceed the {MAX_POINTS}-point limit of the direct seminorm")
    D = u.ndim
    h = [1.0 / n for n in u.shape] if spacing is None else list(np.broadcast_to(spacing, (D,)))
    pts = np.stack(np.meshgrid(*[np.arange(n) * hh for n, hh in zip(u.shape, h)], indexing="ij"),
                   axis=-1).reshape(-1, D)
    vals = u.ravel()
    dv = float(np.prod(h))
    expo = D + s * q
    total = 0.0
    chunk = max(1, 2 ** 22 // max(vals.size, 1))
    for start in range(0, vals.size, chunk):
        sl = slice(start, start + chunk)
        dist = np.sqrt(((pts[sl, None, :] - pts[None, :, :]) ** 2).sum(-1))
        diff = np.abs(vals[sl, None] - vals[None, :]) ** q
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(dist > 0, diff / dist ** expo, 0.0)
        total += float(term.sum())
    return (total * dv * dv) ** (1.0 / q)
