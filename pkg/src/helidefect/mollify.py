"""Mollification, the quadratic commutator and the helicity defect estimator.

For a velocity ``u`` and a unit-mass kernel ``rho_eps`` the commutator is

    R_eps = u_eps (x) u_eps - (u (x) u)_eps

and the helicity defect density at scale ``eps`` is ``2 grad(omega_eps) : R_eps``
with ``omega_eps = curl u_eps``. Mollification is spectral multiplication by
the kernel's Fourier symbol ``rho_hat(eps |k|)``, i.e. periodic convolution.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from ._parallel import ordered_map
from .calculus import curl, quintic_bump
from .errors import EpsilonTooLarge, EpsilonUnderResolved, GridMismatch, InvalidParams
from .grid import (
    GridSpec,
    ScalarField,
    TensorField,
    VectorField,
    integrate,
    lp_norm,
    product_values,
    spectral_ops,
)

KERNELS = ("bump", "gaussian")
_GL_NODES = 512


@functools.lru_cache(maxsize=None)
def _bump_profile():
    r, w = scipy.special.roots_legendre(_GL_NODES)
    r = 0.5 * (r + 1.0)
    w = 0.5 * w
    rho = np.exp(-1.0 / (1.0 - r**2))
    radial = 4.0 * math.pi * w * rho * r**2
    return r, radial / radial.sum()


def bump_symbol(xi):
    """Fourier transform of the normalised radial bump ``exp(-1/(1-|x|^2))`` at ``|xi|``."""
    xi = np.asarray(xi, dtype=float)
    r, weights = _bump_profile()
    flat = xi.ravel()
    out = np.empty(flat.size)
    for s in range(0, flat.size, 4096):
        arg = np.outer(flat[s : s + 4096], r)
        out[s : s + 4096] = np.sinc(arg / math.pi) @ weights
    out[flat == 0.0] = 1.0
    return out.reshape(xi.shape)


def gaussian_symbol(xi):
    xi = np.asarray(xi, dtype=float)
    return np.exp(-0.5 * xi**2)


@functools.lru_cache(maxsize=64)
def _symbol_on_grid(kind, epsilon, grid):
    kmag = spectral_ops(grid).kmag
    uniq, inverse = np.unique(kmag, return_inverse=True)
    fn = bump_symbol if kind == "bump" else gaussian_symbol
    vals = fn(epsilon * uniq)
    sym = vals[inverse].reshape(kmag.shape)
    sym.flags.writeable = False
    return sym


@dataclass(frozen=True)
class Mollifier:
    """Unit-mass radial kernel at length scale ``epsilon``."""

    kind: str = "bump"
    epsilon: float = 0.1

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise InvalidParams(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidParams("epsilon must be positive")

    def symbol(self, kmag):
        fn = bump_symbol if self.kind == "bump" else gaussian_symbol
        return fn(self.epsilon * np.asarray(kmag, dtype=float))

    def check(self, grid: GridSpec):
        if not grid.is_torus:
            raise GridMismatch("mollification is spectral and needs a fully periodic grid")
        limit = min(grid.lengths) / 4.0
        if self.epsilon >= limit:
            raise EpsilonTooLarge(f"epsilon {self.epsilon} must be below {limit}")

    def spectral_symbol(self, grid: GridSpec):
        """Multiplier in the half-spectrum layout of ``spectral_ops(grid)``."""
        self.check(grid)
        return _symbol_on_grid(self.kind, float(self.epsilon), grid)


def mollify(f, m: Mollifier):
    sym = m.spectral_symbol(f.grid)
    return f.with_values(spectral_ops(f.grid).apply(f.values, sym))


@dataclass(frozen=True)
class CommutatorField:
    epsilon: float
    R: TensorField


def _pairs():
    return [(i, j) for i in range(3) for j in range(i, 3)]


def commutator_R(u: VectorField, m: Mollifier, dealias=False) -> CommutatorField:
    """``R = u_eps (x) u_eps - (u (x) u)_eps``, symmetric by construction."""
    sym = m.spectral_symbol(u.grid)
    ops = spectral_ops(u.grid)
    g = u.grid
    ue = ops.apply(u.values, sym)
    R = np.empty((3, 3) + g.dims)
    for i, j in _pairs():
        smooth = product_values(ue[i], ue[j], g, dealias)
        rough = ops.apply(product_values(u.values[i], u.values[j], g, dealias), sym)
        R[i, j] = smooth - rough
        if i != j:
            R[j, i] = R[i, j]
    return CommutatorField(m.epsilon, TensorField(g, R))


def _mollified_parts(u, m):
    sym = m.spectral_symbol(u.grid)
    ops = spectral_ops(u.grid)
    Ue = ops.fwd(u.values) * sym
    return ops, Ue


def _curl_hat(ops, U):
    kx, ky, kz = ops.kd
    return np.stack(
        [1j * (ky * U[2] - kz * U[1]), 1j * (kz * U[0] - kx * U[2]), 1j * (kx * U[1] - ky * U[0])]
    )


def _double_contract_gradient(ops, A_hat, R):
    """sum_ij d_j A_i R_ij for a vector given by its half spectrum."""
    out = np.zeros(R.shape[2:])
    for i in range(3):
        for j in range(3):
            out += ops.inv(1j * ops.kd[j] * A_hat[i]) * R[i, j]
    return out


def defect_density(u: VectorField, p=None, m: Mollifier = None, dealias=False) -> ScalarField:
    """``2 grad(omega_eps) : R_eps``. ``p`` is accepted for symmetry and ignored."""
    R = commutator_R(u, m, dealias).R.values
    ops, Ue = _mollified_parts(u, m)
    W = _curl_hat(ops, Ue)
    return ScalarField(u.grid, 2.0 * _double_contract_gradient(ops, W, R))


def energy_defect_density(u: VectorField, m: Mollifier, dealias=False) -> ScalarField:
    """Companion diagnostic ``grad(u_eps) : R_eps``."""
    R = commutator_R(u, m, dealias).R.values
    ops, Ue = _mollified_parts(u, m)
    return ScalarField(u.grid, _double_contract_gradient(ops, Ue, R))


def helicity_current(u: VectorField, p: ScalarField, m: Mollifier = None) -> VectorField:
    """``u_eps (u_eps . omega_eps) + (p_eps - |u_eps|^2 / 2) omega_eps``; no smoothing if ``m`` is None."""
    if p.grid != u.grid:
        raise GridMismatch("velocity and pressure grids differ")
    if m is not None:
        u = mollify(u, m)
        p = mollify(p, m)
    w = curl(u).values
    uv = u.values
    hel = np.sum(uv * w, axis=0)
    bern = p.values - 0.5 * np.sum(uv**2, axis=0)
    return VectorField(u.grid, uv * hel + bern * w)


def _cross(a, b):
    return np.stack(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def correction_current(u: VectorField, m: Mollifier, dealias=False) -> VectorField:
    """``2 omega_eps R_eps + d_l u_eps x R_eps[:, l] - d_l (u_eps x R_eps[:, l])``."""
    R = commutator_R(u, m, dealias).R.values
    ops, Ue = _mollified_parts(u, m)
    ue = ops.inv(Ue)
    w = ops.inv(_curl_hat(ops, Ue))
    out = 2.0 * np.einsum("i...,ij...->j...", w, R)
    for l in range(3):
        dlu = ops.inv(1j * ops.kd[l] * Ue)
        out += _cross(dlu, R[:, l])
        out -= ops.deriv(_cross(ue, R[:, l]), l)
    return VectorField(u.grid, out)


# ---------------------------------------------------------------------------
# exact vector identities


@dataclass(frozen=True)
class IdentityReport:
    curl_div: float
    cross_div: float
    main_equation: float

    @property
    def max(self):
        return max(self.curl_div, self.cross_div, self.main_equation)


def verify_levi_civita_identities(u: VectorField, R: TensorField) -> IdentityReport:
    """Max-abs residuals of the vector identities behind the mollified helicity balance.

    * ``u . curl div R = -div(u x div R) + curl u . div R``
    * ``div(u x div R) = d_l div(u x R[:, l]) - div(d_l u x R[:, l])``
    * ``omega . div R + u . curl div R
      = -2 grad omega : R + div(2 omega R + d_l u x R[:, l] - d_l(u x R[:, l]))``

    Products are formed pointwise, so inputs should be band limited to a
    quarter of the grid for the identities to hold to rounding.
    """
    if u.grid != R.grid:
        raise GridMismatch("u and R live on different grids")
    if not u.grid.is_torus:
        raise GridMismatch("identity suite runs on the torus")
    ops = spectral_ops(u.grid)
    uv, Rv = u.values, R.values
    D = lambda v, j: ops.deriv(v, j)  # noqa: E731
    div = lambda v: D(v[0], 0) + D(v[1], 1) + D(v[2], 2)  # noqa: E731

    def curl_(v):
        return np.stack([D(v[2], 1) - D(v[1], 2), D(v[0], 2) - D(v[2], 0), D(v[1], 0) - D(v[0], 1)])

    divR = np.stack([D(Rv[i, 0], 0) + D(Rv[i, 1], 1) + D(Rv[i, 2], 2) for i in range(3)])
    w = curl_(uv)
    lhs1 = np.sum(uv * curl_(divR), axis=0)
    u_x_divR = _cross(uv, divR)
    rhs1 = -div(u_x_divR) + np.sum(w * divR, axis=0)

    lhs2 = div(u_x_divR)
    rhs2 = np.zeros_like(lhs2)
    corr = np.zeros_like(uv)
    for l in range(3):
        col = Rv[:, l]
        rhs2 += D(div(_cross(uv, col)), l)
        dlu = np.stack([D(uv[i], l) for i in range(3)])
        rhs2 -= div(_cross(dlu, col))
        corr += _cross(dlu, col) - np.stack([D(c, l) for c in _cross(uv, col)])
    corr += 2.0 * np.einsum("i...,ij...->j...", w, Rv)
    grad_w_R = sum(D(w[i], j) * Rv[i, j] for i in range(3) for j in range(3))
    lhs3 = np.sum(w * divR, axis=0) + lhs1
    rhs3 = -2.0 * grad_w_R + div(corr)
    return IdentityReport(
        float(np.max(np.abs(lhs1 - rhs1))),
        float(np.max(np.abs(lhs2 - rhs2))),
        float(np.max(np.abs(lhs3 - rhs3))),
    )


# ---------------------------------------------------------------------------
# epsilon ladder


def default_ladder(grid: GridSpec, rungs=6, min_rungs=4):
    """``eps_j = L/8 * 2^-j`` for ``j < rungs``, dropping rungs below ``2h``.

    When fewer than ``min_rungs`` survive, ``min_rungs`` geometric rungs between
    ``L/8`` and ``2h`` are used instead.
    """
    L = min(grid.lengths)
    floor = 2.0 * max(grid.spacing)
    top = L / 8.0
    ladder = [top * 2.0**-j for j in range(rungs)]
    ladder = [e for e in ladder if e >= floor * (1.0 - 1e-9)]
    if len(ladder) < min_rungs:
        if top <= floor:
            raise EpsilonUnderResolved(f"grid too coarse for a ladder: L/8={top} <= 2h={floor}")
        ratio = (floor / top) ** (1.0 / (min_rungs - 1))
        ladder = [top * ratio**j for j in range(min_rungs)]
    return ladder


def default_space_tests(grid: GridSpec):
    """Five tensor products of quintic bumps (half width L/4) at fixed placements."""
    fractions = [
        (0.5, 0.5, 0.5),
        (0.25, 0.25, 0.25),
        (0.75, 0.25, 0.5),
        (0.25, 0.75, 0.75),
        (0.75, 0.75, 0.25),
    ]
    tests = []
    for frac in fractions:
        phi = np.ones(grid.dims)
        for a in range(3):
            L = grid.lengths[a]
            x = grid.coords(a)
            d = np.mod(x - frac[a] * L + 0.5 * L, L) - 0.5 * L
            shape = [1, 1, 1]
            shape[a] = -1
            phi = phi * quintic_bump(d / (0.25 * L)).reshape(shape)
        tests.append(ScalarField(grid, phi))
    return tests


def loglog_fit(x, y):
    """Least-squares slope, intercept and R^2 of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), float(r2)


def neville_at_zero(x, y):
    """Value at 0 of the interpolating polynomial through (x_i, y_i)."""
    x = np.asarray(x, float)
    p = np.array(y, dtype=float)
    n = len(x)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
    return float(p[0])


VERDICTS = ("vanishes", "converges to c != 0", "no convergence")


@dataclass
class DefectLadder:
    """Defect densities over a decreasing epsilon ladder and their limit diagnostics."""

    epsilons: list
    defect_fields: list = field(repr=False)
    l1_norms: np.ndarray = None
    pairings: np.ndarray = None
    fitted_slope: float = float("nan")
    r_squared: float = float("nan")
    extrapolated_pairing: np.ndarray = None
    relative_final: float = 0.0
    verdict: str = "no convergence"
    space_only: bool = True
    scale: float = 0.0
    tolerance: float = 0.0
    fit_rungs: int = 4

    def summary(self):
        return {
            "epsilons": [float(e) for e in self.epsilons],
            "l1_defect": [float(v) for v in self.l1_norms],
            "fitted_slope": None if math.isnan(self.fitted_slope) else self.fitted_slope,
            "r_squared": None if math.isnan(self.r_squared) else self.r_squared,
            "extrapolated_pairing": [float(v) for v in self.extrapolated_pairing],
            "relative_final": self.relative_final,
            "verdict": self.verdict,
            "space_only": self.space_only,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "fit_rungs": self.fit_rungs,
        }


def _extrapolate(eps, pairs, slope):
    eps = np.asarray(eps, float)
    if not math.isfinite(slope) or slope <= 0.25:
        return pairs[-1].copy()
    if slope >= 1.5:
        # smooth regime: even kernels expand in powers of eps^2
        x = eps**2
        return np.array([neville_at_zero(x, pairs[:, k]) for k in range(pairs.shape[1])])
    x = eps**slope
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, pairs, rcond=None)
    return coef[0]


def defect_ladder(
    u,
    p=None,
    epsilons=None,
    test_functions=None,
    kernel="bump",
    tol=0.02,
    dealias=False,
    dt=None,
    time_window=None,
    fit_rungs=4,
    keep_fields=True,
) -> DefectLadder:
    """Evaluate ``D_eps`` along a ladder and infer the ``eps -> 0`` behaviour.

    ``u`` is a single velocity snapshot (space-only pairings) or a sequence of
    snapshots spaced by ``dt``; for a sequence each pairing is weighted by the
    time bump ``time_window`` (defaults to a quintic bump over the record) and
    integrated with the trapezoid rule.

    Verdict rules: ``vanishes`` when the fitted L^1 slope over the last
    ``fit_rungs`` rungs exceeds 0.25 and the final-rung pairing magnitude is
    below ``tol`` times ``||u||_{L^3}^3 (2 pi / L)^2 ||phi||_inf``;
    ``converges to c != 0`` when the slope is at most 0.25 and the last two
    rungs' pairings agree to 10 percent; ``no convergence`` otherwise.
    """
    series = list(u) if isinstance(u, (list, tuple)) else [u]
    space_only = len(series) == 1
    grid = series[0].grid
    for s in series:
        if s.grid != grid:
            raise GridMismatch("all snapshots must share one grid")
    if epsilons is None:
        epsilons = default_ladder(grid)
    epsilons = [float(e) for e in epsilons]
    if len(epsilons) < 4:
        raise InvalidParams("ladder needs at least 4 rungs")
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise InvalidParams("ladder must be strictly decreasing")
    floor = 2.0 * max(grid.spacing)
    if epsilons[-1] < floor * (1.0 - 1e-9):
        raise EpsilonUnderResolved(f"epsilon {epsilons[-1]} below 2h = {floor}")
    mollifiers = [Mollifier(kernel, e) for e in epsilons]
    for m in mollifiers:
        m.check(grid)
    if test_functions is None:
        test_functions = default_space_tests(grid)
    phis = [t.values for t in test_functions]

    if space_only:
        time_weights = np.array([1.0])
    else:
        if dt is None:
            raise InvalidParams("dt is required for a time series")
        nt = len(series)
        t = np.arange(nt) * dt
        window = time_window or (lambda s: quintic_bump((s - t[-1] / 2) / (t[-1] / 2)))
        w = np.full(nt, dt)
        w[0] = w[-1] = 0.5 * dt
        time_weights = w * window(t)

    h3 = float(np.prod(grid.spacing))

    def rung(m):
        l1 = 0.0
        pairs = np.zeros(len(phis))
        last = None
        for wt, snap in zip(time_weights, series):
            if wt == 0.0:
                continue
            D = defect_density(snap, None, m, dealias)
            l1 += wt * float(np.add.reduce(np.abs(D.values).ravel())) * h3
            pairs += wt * np.array([np.add.reduce((D.values * ph).ravel()) * h3 for ph in phis])
            last = D
        return l1, pairs, (last if keep_fields else None)

    results = ordered_map(rung, mollifiers)
    l1 = np.array([r[0] for r in results])
    pairs = np.array([r[1] for r in results])
    fields = [r[2] for r in results]

    L = min(grid.lengths)
    u3 = sum(wt * lp_norm(s.values, grid, 3) ** 3 for wt, s in zip(time_weights, series))
    phi_inf = max(float(np.max(np.abs(ph))) for ph in phis)
    scale = u3 * (2.0 * math.pi / L) ** 2 * phi_inf

    k = min(fit_rungs, len(epsilons))
    tail_eps, tail_l1 = epsilons[-k:], l1[-k:]
    if np.all(l1 == 0.0) and np.all(pairs == 0.0):
        return DefectLadder(
            epsilons, fields, l1, pairs, float("nan"), float("nan"), np.zeros(len(phis)),
            0.0, "vanishes", space_only, scale, tol, k,
        )
    if np.any(tail_l1 <= 0.0):
        slope, r2 = float("nan"), float("nan")
    else:
        slope, _, r2 = loglog_fit(tail_eps, tail_l1)
    extrap = _extrapolate(tail_eps, pairs[-k:], slope)
    relative = float(np.max(np.abs(pairs[-1]))) / scale if scale > 0 else float("inf")
    if math.isfinite(slope) and slope > 0.25 and relative < tol:
        verdict = VERDICTS[0]
    else:
        last, prev = pairs[-1], pairs[-2]
        spread = float(np.max(np.abs(last - prev)))
        size = float(np.max(np.abs(last)))
        if (not math.isfinite(slope) or slope <= 0.25) and size > 0 and spread <= 0.1 * size:
            verdict = VERDICTS[1]
        else:
            verdict = VERDICTS[2]
    return DefectLadder(
        epsilons, fields, l1, pairs, slope, r2, extrap, relative, verdict, space_only, scale, tol, k
    )
