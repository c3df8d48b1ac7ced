"""Slab geometry T^2 x (0, 1): cutoffs, Lebesgue traces, boundary flux and the helicity budget.

The slab grid is periodic in ``x, y`` and cell centred in ``z``. Horizontal
derivatives are spectral; ``d/dz`` uses fourth-order differences with
one-sided closures on the two layers next to each wall.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from ._parallel import ordered_map
from .calculus import TimeBump
from .errors import (
    GridMismatch,
    InsufficientData,
    InvalidRadius,
    ShellUnderResolved,
    UntrustedTrace,
)
from .grid import GridSpec, ScalarField, VectorField, spectral_ops

FACES = ("bottom", "top")
TANGENCY_TOL = 1e-6
TRACE_TOL = 1e-3


@dataclass(frozen=True)
class SlabDomain:
    grid: GridSpec

    def __post_init__(self):
        g = self.grid
        if g.periodic_mask != (True, True, False):
            raise GridMismatch("slab grids are periodic in x and y only")
        if abs(g.lengths[2] - 1.0) > 1e-12:
            raise GridMismatch("slab height must be 1")

    @classmethod
    def of(cls, f):
        return cls(f.grid)

    @property
    def z_nodes(self):
        return self.grid.coords(2)

    @property
    def z_weights(self):
        return self.grid.axis_weights(2)

    @property
    def hz(self):
        return self.grid.spacing[2]

    @property
    def area(self):
        return self.grid.lengths[0] * self.grid.lengths[1]

    @property
    def dA(self):
        return self.grid.spacing[0] * self.grid.spacing[1]

    def outer_normal(self, face):
        return {"bottom": -1.0, "top": 1.0}[_face(face)]


def _face(face):
    if face not in FACES:
        raise ValueError(f"face must be one of {FACES}")
    return face


def _domain(f, d=None):
    return SlabDomain(f.grid) if d is None else d


# ---------------------------------------------------------------------------
# derivatives

_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def dz(values, grid: GridSpec):
    """Fourth-order ``d/dz`` along the last axis of cell-centred samples."""
    v = np.asarray(values)
    n = v.shape[-1]
    if n < 5:
        raise ShellUnderResolved("need at least 5 z layers for the z stencil")
    h = grid.spacing[2]
    out = np.empty_like(v, dtype=float)
    out[..., 2 : n - 2] = (
        v[..., 0 : n - 4] - 8.0 * v[..., 1 : n - 3] + 8.0 * v[..., 3 : n - 1] - v[..., 4:n]
    ) / 12.0
    out[..., 0] = v[..., 0:5] @ _EDGE0
    out[..., 1] = v[..., 0:5] @ _EDGE1
    out[..., n - 1] = -(v[..., n - 5 : n][..., ::-1] @ _EDGE0)
    out[..., n - 2] = -(v[..., n - 5 : n][..., ::-1] @ _EDGE1)
    return out / h


def _dxy(values, grid, axis):
    return spectral_ops(grid).deriv(values, axis)


def slab_curl(u: VectorField) -> VectorField:
    SlabDomain(u.grid)
    g = u.grid
    ux, uy, uz = u.values
    w = np.stack(
        [
            _dxy(uz, g, 1) - dz(uy, g),
            dz(ux, g) - _dxy(uz, g, 0),
            _dxy(uy, g, 0) - _dxy(ux, g, 1),
        ]
    )
    return VectorField(g, w)


def slab_integrate(values, grid: GridSpec):
    w = grid.cell_weights()
    return float(np.add.reduce((np.asarray(values) * w).ravel()))


def slab_helicity(u: VectorField) -> float:
    w = slab_curl(u).values
    return slab_integrate(np.sum(u.values * w, axis=0), u.grid)


# ---------------------------------------------------------------------------
# distance and cutoff


def distance_field(d: SlabDomain) -> ScalarField:
    z = d.z_nodes
    dist = np.minimum(z, 1.0 - z)
    return ScalarField(d.grid, np.broadcast_to(dist, d.grid.dims).copy())


def _chi(dist, r):
    return np.minimum(np.asarray(dist) / r, 1.0)


@dataclass(frozen=True)
class CutoffProfile:
    """``chi_r = min(dist / r, 1)`` and its z-derivative as exact cell averages.

    ``dchi_dz`` at a node is ``(chi(z + h/2) - chi(z - h/2)) / h``; away from
    the cell containing ``dist = r`` this is the analytic ``+-1/r`` or 0, and
    layer sums with midpoint weights reproduce ``int d chi = 1`` exactly.
    """

    r: float
    chi: ScalarField
    dchi_dz: np.ndarray

    @property
    def gradient(self) -> VectorField:
        g = self.chi.grid
        zero = np.zeros(g.dims)
        dz_ = np.broadcast_to(self.dchi_dz, g.dims)
        return VectorField(g, np.stack([zero, zero, dz_]))


def _check_radius(d, r):
    if not (2.0 * d.hz < r < 0.5):
        raise InvalidRadius(f"r={r} must lie in (2h_z, 1/2) = ({2.0 * d.hz}, 0.5)")


def cutoff_chi_r(d: SlabDomain, r) -> CutoffProfile:
    _check_radius(d, r)
    z = d.z_nodes
    h = d.hz
    dist = np.minimum(z, 1.0 - z)
    hi = z + 0.5 * h
    lo = z - 0.5 * h
    dchi = (_chi(np.minimum(hi, 1.0 - hi), r) - _chi(np.minimum(lo, 1.0 - lo), r)) / h
    chi = ScalarField(d.grid, np.broadcast_to(_chi(dist, r), d.grid.dims).copy())
    return CutoffProfile(float(r), chi, dchi)


# ---------------------------------------------------------------------------
# Lebesgue traces


@dataclass(frozen=True)
class TraceEstimate:
    face: str
    values: np.ndarray
    shell_radii: tuple
    residual: float
    shell_means: np.ndarray = field(repr=False, default=None)

    @property
    def mean(self):
        return float(np.mean(self.values))


def _disk_average(layer, rho, grid):
    """Average over horizontal disks of radius ``rho``, as the multiplier 2 J1(k rho)/(k rho)."""
    if rho <= 0:
        return layer
    ops = spectral_ops(grid)
    kh = np.sqrt(ops.k[0] ** 2 + ops.k[1] ** 2)[..., 0]
    arg = kh * rho
    safe = np.where(arg > 0, arg, 1.0)
    mult = np.where(arg > 0, 2.0 * scipy.special.j1(safe) / safe, 1.0)
    F = np.fft.rfft2(layer)
    return np.fft.irfft2(F * mult, s=layer.shape)


def _shell_table(values2d_by_layer, d, face, radii_h):
    """Half-ball averages around every face point for radii ``m * h_z``."""
    h = d.hz
    nz = d.grid.dims[2]
    if nz < 2 * max(radii_h) or len(radii_h) < 3:
        raise ShellUnderResolved(f"cannot resolve {len(radii_h)} shells of up to {max(radii_h)} layers")
    means, dbar = [], []
    for m in radii_h:
        r = m * h
        total = 0.0
        wsum = 0.0
        dsum = 0.0
        for j in range(int(math.ceil(m))):
            dist = (j + 0.5) * h
            if dist >= r:
                break
            rho = math.sqrt(r * r - dist * dist)
            w = math.pi * rho * rho * h
            layer = values2d_by_layer(j if face == "bottom" else nz - 1 - j)
            total = total + w * _disk_average(layer, rho, d.grid)
            wsum += w
            dsum += w * dist
        means.append(total / wsum)
        dbar.append(dsum / wsum)
    return np.array(means), np.array(dbar)


def _extrapolate_zero(means, dbar):
    A = np.vstack([np.ones_like(dbar), dbar]).T
    coef, *_ = np.linalg.lstsq(A, means.reshape(len(dbar), -1), rcond=None)
    fit = A @ coef
    resid = float(np.max(np.abs(fit - means.reshape(len(dbar), -1)))) if means.size else 0.0
    return coef[0].reshape(means.shape[1:]), resid


def normal_trace_estimate(U: VectorField, face, d: SlabDomain = None, radii=(3, 2, 1)) -> TraceEstimate:
    """Outer normal trace ``U . n`` from half-ball averages of ``-U . grad(dist)``.

    ``radii`` are shell radii in units of the z spacing; the shell means are
    regressed linearly on their mean wall distance and evaluated at 0.
    """
    d = _domain(U, d)
    face = _face(face)
    uz = U.values[2]
    sign = d.outer_normal(face)
    means, dbar = _shell_table(lambda j: sign * uz[:, :, j], d, face, tuple(radii))
    vals, resid = _extrapolate_zero(means, dbar)
    return TraceEstimate(face, vals, tuple(m * d.hz for m in radii), resid, means)


def full_trace_estimate(f: ScalarField, face, d: SlabDomain = None, radii=(3, 2, 1)) -> TraceEstimate:
    d = _domain(f, d)
    face = _face(face)
    means, dbar = _shell_table(lambda j: f.values[:, :, j], d, face, tuple(radii))
    vals, resid = _extrapolate_zero(means, dbar)
    return TraceEstimate(face, vals, tuple(m * d.hz for m in radii), resid, means)


# ---------------------------------------------------------------------------
# trace pairing


@dataclass
class TracePairingReport:
    radii: list
    lhs: list
    rhs: float
    gaps: list
    limit: float
    final_gap: float
    monotone: bool
    tolerance: float

    @property
    def passed(self):
        return self.monotone and self.final_gap < self.tolerance

    @property
    def status(self):
        # a finite radius ladder can support a trace, never certify one
        return "consistent with trace" if self.passed else "not consistent with trace"


def default_pairing_radii(d: SlabDomain, rungs=5):
    """Radii that are whole multiples of ``h_z`` between ``3 h_z`` and about 0.45 (descending)."""
    nz = d.grid.dims[2]
    top = int(math.floor(0.45 * nz))
    if top < 3 + rungs - 1:
        raise InvalidRadius("slab too coarse for a radius ladder")
    ms = np.unique(np.round(np.geomspace(3, top, rungs)).astype(int))
    return [m * d.hz for m in ms[::-1]]


def _midpoint_integral(values, d):
    return float(np.add.reduce(np.asarray(values).ravel())) * d.dA * d.hz


def trace_pairing_limit(U: VectorField, phi: ScalarField, radii=None, d: SlabDomain = None, tol=5e-3):
    """Both sides of ``lim_r int phi U . grad chi_r = - int_boundary phi U_n``.

    Layer integrals use the midpoint rule with cell-averaged ``grad chi_r``.
    The reported limit is the least-squares line in ``r`` evaluated at 0.
    """
    d = _domain(U, d)
    if phi.grid != U.grid:
        raise GridMismatch("phi and U must share the slab grid")
    if radii is None:
        radii = default_pairing_radii(d)
    radii = sorted((float(r) for r in radii), reverse=True)
    if len(radii) < 4:
        raise InvalidRadius("need at least 4 radii")
    flux = phi.values * U.values[2]

    def lhs_at(r):
        prof = cutoff_chi_r(d, r)
        return _midpoint_integral(flux * prof.dchi_dz, d)

    lhs = ordered_map(lhs_at, radii)
    phiU = VectorField(U.grid, U.values * phi.values)
    rhs = 0.0
    for face in FACES:
        rhs -= float(np.sum(normal_trace_estimate(phiU, face, d).values)) * d.dA
    gaps = [abs(v - rhs) for v in lhs]
    r = np.array(radii)
    A = np.vstack([np.ones_like(r), r]).T
    coef, *_ = np.linalg.lstsq(A, np.array(lhs), rcond=None)
    limit = float(coef[0])
    scale = max(1.0, abs(rhs))
    monotone = all(b <= a + 1e-12 * scale for a, b in zip(gaps, gaps[1:]))
    return TracePairingReport(radii, lhs, rhs, gaps, limit, abs(limit - rhs), monotone, tol)


# ---------------------------------------------------------------------------
# boundary flux and budget


@dataclass(frozen=True)
class FluxReport:
    value: float
    untrusted: bool
    residual: float
    tangent: bool

    def __float__(self):
        return self.value


def boundary_helicity_flux(u: VectorField, p: ScalarField, d: SlabDomain = None, warn=True) -> FluxReport:
    """``sum over faces of int (|u|^2/2 - p) omega_n dA`` from Lebesgue trace estimates."""
    d = _domain(u, d)
    if p.grid != u.grid:
        raise GridMismatch("velocity and pressure grids differ")
    w = slab_curl(u)
    bern = ScalarField(u.grid, 0.5 * np.sum(u.values**2, axis=0) - p.values)
    umax = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    value = 0.0
    residual = 0.0
    tangent = True
    untrusted = False
    for face in FACES:
        bt = full_trace_estimate(bern, face, d)
        wn = normal_trace_estimate(w, face, d)
        un = normal_trace_estimate(u, face, d)
        value += float(np.sum(bt.values * wn.values)) * d.dA
        if np.max(np.abs(un.values)) >= TANGENCY_TOL * umax and umax > 0:
            tangent = False
        for tr, fld in ((bt, bern.values), (wn, w.values[2])):
            scale = float(np.max(np.abs(fld)))
            rel = tr.residual / scale if scale > 0 else 0.0
            residual = max(residual, rel)
    if residual > TRACE_TOL:
        untrusted = True
    if warn and not tangent:
        warnings.warn("velocity is not tangent to the boundary within tolerance", UntrustedTrace, stacklevel=2)
    if warn and untrusted:
        warnings.warn(f"trace extrapolation residual {residual:.2e} exceeds {TRACE_TOL}", UntrustedTrace, stacklevel=2)
    return FluxReport(value, untrusted, residual, tangent)


def default_alpha_battery(t_start, t_end, n=8):
    """Quintic time bumps with supports strictly inside the record."""
    span = t_end - t_start
    out = []
    for i in range(n):
        c = t_start + span * (0.35 + 0.3 * i / max(n - 1, 1))
        room = min(c - t_start, t_end - c)
        out.append(TimeBump(c, room * (0.95 - 0.4 * i / max(n - 1, 1))))
    return out


@dataclass
class BudgetReport:
    times: np.ndarray
    helicity: np.ndarray
    flux: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residuals: np.ndarray
    alpha_l1: np.ndarray
    untrusted: bool

    @property
    def normalized_residuals(self):
        return self.residuals / np.where(self.alpha_l1 > 0, self.alpha_l1, 1.0)

    def rows(self):
        return [(float(t), float(h), float(f)) for t, h, f in zip(self.times, self.helicity, self.flux)]


def _trap(n, dt):
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def helicity_budget(u_series, p_series, dt, alphas=None, d: SlabDomain = None) -> BudgetReport:
    """Residuals of ``int H alpha' dt = int alpha F dt`` for a battery of time bumps.

    ``H`` is the slab-quadrature helicity and ``F`` the boundary flux. The
    left side is evaluated as ``-int H' alpha dt`` (the bumps vanish at the
    record ends) with ``H'`` from second-order centred differences; both
    sides use the trapezoid rule. Residuals are signed ``LHS - RHS``.
    """
    u_series, p_series = list(u_series), list(p_series)
    if len(u_series) < 8:
        raise InsufficientData("helicity budget needs at least 8 time slices")
    if len(p_series) != len(u_series):
        raise InsufficientData("velocity and pressure series differ in length")
    d = _domain(u_series[0], d)
    for f in u_series + p_series:
        if f.grid != d.grid:
            raise GridMismatch("all slices must share the slab grid")
    nt = len(u_series)
    times = np.arange(nt) * dt
    H = np.array(ordered_map(slab_helicity, u_series))
    reports = ordered_map(lambda up: boundary_helicity_flux(up[0], up[1], d, warn=False), list(zip(u_series, p_series)))
    F = np.array([r.value for r in reports])
    untrusted = any(r.untrusted for r in reports)
    if alphas is None:
        alphas = default_alpha_battery(times[0], times[-1])
    dH = np.gradient(H, dt, edge_order=2)
    w = _trap(nt, dt)
    lhs, rhs, l1 = [], [], []
    for a in alphas:
        av = np.asarray(a(times), dtype=float)
        lhs.append(-float(np.sum(w * dH * av)))
        rhs.append(float(np.sum(w * F * av)))
        l1.append(float(np.sum(w * np.abs(av))))
    lhs, rhs = np.array(lhs), np.array(rhs)
    return BudgetReport(times, H, F, lhs, rhs, lhs - rhs, np.array(l1), untrusted)
