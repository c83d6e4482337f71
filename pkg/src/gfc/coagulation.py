"""Pair-based conservative discretization of binary coagulation.

Every source pair (i, j) produces merged mass at s = x_i + x_j, split between
the two cell centers bracketing s with weights that reproduce s exactly as
the weighted average.  Pairs whose product lands beyond the last center are
split between the last cell and a virtual node at xmax whose share is routed
to the escaped-mass account, and pairs beyond xmax escape entirely, so the
discrete mass budget closes to rounding.  Cost is O(cells^2) per application
with all pair data precomputed; adequate at desk scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DensityField, SizeGrid
from .kernels import CoagulationKernel

__all__ = [
    "CoagTables",
    "CoagIdentityReport",
    "build_coag_tables",
    "apply_coag",
    "apply_coag_beta",
    "coag_loss_rate",
    "coag_moment_identity",
]


@dataclass
class CoagTables:
    """Precomputed pair kernel values and mass-conserving splitting targets."""

    grid: SizeGrid
    kernel: np.ndarray        # k(x_i, x_j), (n, n)
    idx_lo: np.ndarray        # flat (n*n,) lower target cell, -1 if none
    w_lo: np.ndarray          # number weight into idx_lo
    idx_hi: np.ndarray        # flat upper target cell, -1 if escape/none
    w_hi: np.ndarray
    esc_coeff: np.ndarray     # mass routed past xmax per unit event rate
    interior: np.ndarray      # flat bool: pure two-cell interior split


def build_coag_tables(k: CoagulationKernel, grid: SizeGrid) -> CoagTables:
    x = grid.centers
    n = grid.cells
    kernel = np.asarray(k(x[:, None], x[None, :]), dtype=float)

    s = (x[:, None] + x[None, :]).ravel()
    idx_lo = np.full(s.shape, -1, dtype=np.int64)
    w_lo = np.zeros_like(s)
    idx_hi = np.full(s.shape, -1, dtype=np.int64)
    w_hi = np.zeros_like(s)
    esc_coeff = np.zeros_like(s)

    inter = s <= x[-1]
    straddle = (s > x[-1]) & (s <= grid.xmax)
    beyond = s > grid.xmax

    # interior: bracket between consecutive centers (s >= 2*xmin > x[0])
    lo = np.searchsorted(x, s[inter], side="right") - 1
    lo = np.clip(lo, 0, n - 2)
    span = x[lo + 1] - x[lo]
    wl = (x[lo + 1] - s[inter]) / span
    idx_lo[inter] = lo
    w_lo[inter] = wl
    idx_hi[inter] = lo + 1
    w_hi[inter] = 1.0 - wl

    # straddling the last center: split against a virtual node at xmax,
    # whose share leaves the grid as escaped mass
    span = grid.xmax - x[-1]
    wl = (grid.xmax - s[straddle]) / span
    idx_lo[straddle] = n - 1
    w_lo[straddle] = wl
    esc_coeff[straddle] = (1.0 - wl) * grid.xmax

    esc_coeff[beyond] = s[beyond]

    return CoagTables(grid, kernel, idx_lo, w_lo, idx_hi, w_hi, esc_coeff, inter)


def _event_rates(f: DensityField, ct: CoagTables) -> np.ndarray:
    """E[i, j] = 0.5 * k(x_i, x_j) * f_i dx_i * f_j dx_j, flattened."""
    amounts = f.values * f.grid.widths
    return (0.5 * ct.kernel * np.outer(amounts, amounts)).ravel()


def coag_loss_rate(f: DensityField, ct: CoagTables) -> np.ndarray:
    """Pointwise loss frequency Lambda(x_i) = sum_j k(x_i, x_j) f_j dx_j."""
    return ct.kernel @ (f.values * f.grid.widths)


def apply_coag(f: DensityField, ct: CoagTables) -> DensityField:
    """Coagulation rate field; the escaped_mass slot carries the rate of
    mass routed past xmax."""
    grid = f.grid
    n = grid.cells
    ev = _event_rates(f, ct)

    gain_num = np.zeros(n)
    sel = ct.idx_lo >= 0
    gain_num += np.bincount(ct.idx_lo[sel], weights=ev[sel] * ct.w_lo[sel], minlength=n)
    sel = ct.idx_hi >= 0
    gain_num += np.bincount(ct.idx_hi[sel], weights=ev[sel] * ct.w_hi[sel], minlength=n)
    esc_rate = float(np.sum(ev * ct.esc_coeff))

    vals = gain_num / grid.widths - f.values * coag_loss_rate(f, ct)
    return DensityField(grid, vals, esc_rate)


def apply_coag_beta(f: DensityField, ct: CoagTables, beta: float, alpha: float) -> DensityField:
    """Shifted operator beta*(1 + x^alpha)*f + Kf.

    Componentwise nonnegative on nonnegative fields inside the weighted-norm
    ball the shift was derived for: the pointwise loss frequency is dominated
    by beta*(1 + x^alpha) there.
    """
    base = apply_coag(f, ct)
    if beta != 0.0:
        x = f.grid.centers
        base.values = base.values + beta * (1.0 + np.power(x, alpha)) * f.values
    return base


@dataclass
class CoagIdentityReport:
    order: float
    lhs: float
    rhs: float
    escaped_rate: float
    rel_discrepancy: float
    detail: str = ""


def coag_moment_identity(f: DensityField, i: float, ct: CoagTables) -> CoagIdentityReport:
    """Moment rate of the discretized operator against the exact double sum.

    For i = 1 the comparison includes the routed overflow so both sides are
    zero to rounding; for i = 0 the double sum collapses to minus half the
    total event rate; other orders pick up the pair-splitting error only.
    """
    grid = f.grid
    x = grid.centers
    kf = apply_coag(f, ct)
    lhs = float(np.sum(np.power(x, i) * kf.values * grid.widths))
    if i == 1:
        lhs += kf.escaped_mass

    ev = _event_rates(f, ct)
    s = (x[:, None] + x[None, :]).ravel()
    xi = np.power(x, i)
    cross = np.power(s, i) - np.add.outer(xi, xi).ravel()
    rhs = float(np.sum(ev * cross))

    scale = max(abs(lhs), abs(rhs), float(np.sum(ev * np.power(s, i))), 1e-300)
    return CoagIdentityReport(i, lhs, rhs, kf.escaped_mass,
                              abs(lhs - rhs) / scale)
