"""Fractional Sobolev and Besov seminorms, increment scaling and inequality checks.

Seminorm conventions on the torus (``f_hat`` as in :mod:`helidefect.grid`)::

    [f]_{H^1/2}^2 = sum_k |k| |f_hat_k|^2

The Monte Carlo Gagliardo estimator integrates ``|f(x) - f(x+z)|^2 / |z|^4``
over ``x`` in the box and ``z`` in all of R^3, which for periodic ``f`` is the
double integral with the periodised kernel. Its exact relation to the Fourier
form is ``2 pi^2 * volume * [f]^2``, so the estimate is divided by that.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._parallel import ordered_map
from .errors import CostGuard, EpsilonUnderResolved, InvalidParams, PoorFit
from .grid import Field, GridSpec, TrigInterpolant, spectral_ops
from .mollify import Mollifier, default_ladder, loglog_fit

GAGLIARDO_CALIBRATION = 2.0 * math.pi**2
MC_BATCH = 4096
MC_MAX_N = 32


@dataclass(frozen=True)
class BesovParams:
    theta: float
    p: float = 3.0
    increments: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise InvalidParams("theta must lie in (0, 1)")
        if not self.p >= 1.0:
            raise InvalidParams("p must be >= 1")
        if self.increments is not None:
            inc = tuple(float(h) for h in self.increments)
            if not inc:
                raise InvalidParams("increment ladder is empty")
            if any(b >= a for a, b in zip(inc, inc[1:])):
                raise InvalidParams("increment ladder must be strictly decreasing")
            object.__setattr__(self, "increments", inc)


@dataclass
class SeminormReport:
    value: float
    method: str
    mc_stderr: float = 0.0
    table: list = field(default_factory=list)
    samples: int = 0

    @property
    def value_sq(self):
        return self.value**2


def _require_torus(f):
    if not f.grid.is_torus:
        raise InvalidParams("seminorms are evaluated on the torus")


def h_half_seminorm_fourier(f: Field) -> SeminormReport:
    _require_torus(f)
    ops = spectral_ops(f.grid)
    F = ops.fwd(f.values)
    # half spectrum: interior modes of the last axis stand for a conjugate pair
    nz = f.grid.dims[2]
    mult = np.full(F.shape[-1], 2.0)
    mult[0] = 1.0
    if nz % 2 == 0:
        mult[-1] = 1.0
    w = ops.kmag * mult
    total = float(np.add.reduce((np.abs(F) ** 2 * w).ravel())) / f.grid.npoints**2
    return SeminormReport(math.sqrt(max(total, 0.0)), "fourier")


def _sample_displacements(rng, n, R):
    """Displacements from the mixture 1/2 * uniform-radius ball + 1/2 * Pareto tail,
    with importance weights ``|z|^-4 / q(z)``."""
    inner = rng.random(n) < 0.5
    u = rng.random(n)
    r = np.where(inner, R * u, R / np.maximum(1.0 - u, 1e-300))
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    z = v * r[:, None]
    # q(z) = 1/2 * 1/(4 pi r^2 R) inside, 1/2 * R/(4 pi r^4) outside
    w = np.where(r < R, 8.0 * math.pi * R / r**2, 8.0 * math.pi / R)
    return z, w


def gagliardo_seminorm_mc(f: Field, samples=20000, seed=0, radius=None) -> SeminormReport:
    """Monte Carlo Gagliardo seminorm, calibrated to the Fourier normalisation.

    Point pairs are stratified by separation: half the displacements have a
    uniformly distributed length below ``radius`` (which cancels the kernel
    singularity), the other half follow a Pareto tail beyond it.
    """
    _require_torus(f)
    if max(f.grid.dims) > MC_MAX_N:
        raise CostGuard(f"Monte Carlo seminorm limited to N <= {MC_MAX_N} per axis")
    samples = int(samples)
    if samples < 10_000:
        raise InvalidParams("use at least 10^4 samples")
    R = 0.5 * min(f.grid.lengths) if radius is None else float(radius)
    interp = TrigInterpolant(f)
    lengths = np.array(f.grid.lengths)
    sizes = [MC_BATCH] * (samples // MC_BATCH)
    if samples % MC_BATCH:
        sizes.append(samples % MC_BATCH)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def batch(args):
        n, ss = args
        rng = np.random.default_rng(ss)
        x = rng.random((n, 3)) * lengths
        z, w = _sample_displacements(rng, n, R)
        fx = interp(x).reshape(n, -1)
        fy = interp(x + z).reshape(n, -1)
        return np.sum((fx - fy) ** 2, axis=1) * w

    terms = np.concatenate(ordered_map(batch, list(zip(sizes, seeds))))
    terms /= GAGLIARDO_CALIBRATION
    mean = float(np.mean(terms))
    stderr = float(np.std(terms, ddof=1) / math.sqrt(samples))
    return SeminormReport(math.sqrt(max(mean, 0.0)), "gagliardo_mc", stderr, samples=samples)


# ---------------------------------------------------------------------------
# increments and Besov moduli

# one representative of each +-pair of the 26 lattice neighbour directions;
# on the torus ||f(. + h) - f|| = ||f(. - h) - f||
DIRECTIONS = [
    d
    for d in ((i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1))
    if d > (0, 0, 0)
]


def _lp(values, grid, p):
    mag = np.sqrt(np.sum(values.reshape((-1,) + grid.dims) ** 2, axis=0))
    if math.isinf(p):
        return float(mag.max())
    return float(np.mean(mag**p) * grid.volume) ** (1.0 / p)


def increment_norm(f: Field, shift, p):
    """``||f(. + shift*h) - f||_p`` for an integer lattice shift."""
    ax = tuple(range(f.values.ndim - 3, f.values.ndim))
    shifted = np.roll(f.values, tuple(-int(s) for s in shift), axis=ax)
    return _lp(shifted - f.values, f.grid, p)


def default_increments(grid: GridSpec):
    """Geometric-ish magnitudes from ``h`` to ``L/4`` (descending)."""
    h = max(grid.spacing)
    top = min(grid.lengths) / 4.0
    steps = [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128]
    return tuple(sorted((n * h for n in steps if n * h <= top * (1 + 1e-12)), reverse=True))


def _increment_table(f, magnitudes, p):
    """Rows (requested magnitude, actual |h|, direction, norm) over 13 directions."""
    _require_torus(f)
    g = f.grid
    hmin = min(g.spacing)
    jobs = []
    for m in magnitudes:
        if m < hmin * (1 - 1e-9):
            raise InvalidParams(f"increment {m} below grid spacing {hmin}")
        for d in DIRECTIONS:
            step = math.sqrt(sum((d[a] * g.spacing[a]) ** 2 for a in range(3)))
            n = max(1, int(round(m / step)))
            jobs.append((m, n * step, tuple(n * c for c in d)))
    norms = ordered_map(lambda job: increment_norm(f, job[2], p), jobs)
    return [(m, hm, s, v) for (m, hm, s), v in zip(jobs, norms)]


def _besov_rows(f, params):
    inc = params.increments or default_increments(f.grid)
    if not inc:
        raise InvalidParams("increment ladder is empty")
    rows = _increment_table(f, inc, params.p)
    per = {}
    for m, hm, _, v in rows:
        per[m] = max(per.get(m, 0.0), v / hm**params.theta)
    return inc, per


def besov_seminorm(f: Field, params: BesovParams) -> SeminormReport:
    """``sup_h ||f(. + h) - f||_p / |h|^theta`` over the increment ladder and 13 direction pairs."""
    inc, per = _besov_rows(f, params)
    table = [{"h": m, "ratio": per[m]} for m in inc]
    return SeminormReport(max(per.values()), "finite_difference", table=table)


def besov_modulus(f: Field, params: BesovParams):
    """Running sup ``l(eps) = sup_{|h| <= eps} ||f(.+h) - f||_p / |h|^theta``.

    Returns ``(eps, l)`` pairs in decreasing ``eps``.
    """
    inc, per = _besov_rows(f, params)
    ascending = sorted(inc)
    out, run = [], 0.0
    for m in ascending:
        run = max(run, per[m])
        out.append((m, run))
    return list(reversed(out))


def c0_proxy(modulus, threshold=0.5):
    """Finite-grid stand-in for the vanishing-modulus class: ``l(eps_min)/l(eps_max) < threshold``."""
    top = modulus[0][1]
    bottom = modulus[-1][1]
    if top == 0.0:
        return True, 0.0
    ratio = bottom / top
    return ratio < threshold, ratio


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    r_squared: float
    poor_fit: bool
    saturated: bool
    increments: tuple
    norms: tuple


def scaling_exponent(f: Field, p=3.0, increments=None, min_points=5) -> ScalingFit:
    """Log-log slope of ``||f(. + h) - f||_p`` against ``|h|`` pooled over directions."""
    if increments is None:
        h = max(f.grid.spacing)
        top = min(f.grid.lengths) / 4.0
        increments = tuple(n * h for n in (32, 24, 16, 12, 8, 6, 4, 3, 2) if n * h <= top * (1 + 1e-12))
    increments = tuple(sorted(increments, reverse=True))
    if len(increments) < min_points or increments[0] / increments[-1] < 10.0 * (1 - 1e-9):
        raise InvalidParams("need at least 5 increments spanning a decade")
    rows = _increment_table(f, increments, p)
    hs = np.array([r[1] for r in rows])
    vs = np.array([r[3] for r in rows])
    # directions along which f is invariant carry no scaling information
    keep = vs > 0
    if not keep.any():
        raise InvalidParams("field has vanishing increments (constant?)")
    hs, vs = hs[keep], vs[keep]
    slope, _, r2 = loglog_fit(hs, vs)
    poor = r2 < 0.9
    if poor:
        warnings.warn(f"scaling fit R^2 = {r2:.3f} < 0.9", PoorFit, stacklevel=2)
    saturated = slope > 0.95
    return ScalingFit(slope, r2, poor, saturated, tuple(hs), tuple(vs))


# ---------------------------------------------------------------------------
# mollifier inequalities


@dataclass
class CommutatorBoundReport:
    epsilons: list
    quadratic_norms: list
    gradient_norms: list
    quadratic_slope: float
    gradient_slope: float
    predicted_quadratic: float
    predicted_gradient: float
    slack: float
    k: int

    @property
    def quadratic_pass(self):
        return self.quadratic_slope >= self.predicted_quadratic - self.slack

    @property
    def gradient_pass(self):
        return self.gradient_slope >= self.predicted_gradient - self.slack

    @property
    def passed(self):
        return self.quadratic_pass and self.gradient_pass


def _as_components(f):
    return f.values.reshape((-1,) + f.grid.dims)


def verify_commutator_bounds(f: Field, g: Field = None, theta=2.0 / 3.0, p=3.0, epsilons=None, k=1, kernel="bump", slack=0.25):
    """Measured eps-slopes of ``||f_eps g_eps - (fg)_eps||_{p/2}`` and ``||grad^k f_eps||_p``.

    For vector inputs the product is the outer product and norms use the
    Euclidean magnitude of all components.
    """
    if p < 2:
        raise InvalidParams("the quadratic bound needs p >= 2")
    if k not in (1, 2):
        raise InvalidParams("k must be 1 or 2")
    g = f if g is None else g
    if f.grid != g.grid:
        raise InvalidParams("f and g live on different grids")
    grid = f.grid
    _require_torus(f)
    if epsilons is None:
        epsilons = default_ladder(grid)
    floor = 2.0 * max(grid.spacing)
    if min(epsilons) < floor * (1 - 1e-9):
        raise EpsilonUnderResolved(f"epsilon below 2h = {floor}")
    ops = spectral_ops(grid)
    fc, gc = _as_components(f), _as_components(g)
    Fh = ops.fwd(fc)
    products = [(i, j, ops.fwd(fc[i] * gc[j])) for i in range(fc.shape[0]) for j in range(gc.shape[0])]

    def rung(eps):
        m = Mollifier(kernel, eps)
        sym = m.spectral_symbol(grid)
        fe = ops.inv(Fh * sym)
        ge = fe if g is f else ops.inv(ops.fwd(gc) * sym)
        quad = np.stack([fe[i] * ge[j] - ops.inv(P * sym) for i, j, P in products])
        if k == 1:
            grads = np.stack([ops.inv(1j * ops.kd[a] * Fh * sym) for a in range(3)])
        else:
            grads = np.stack(
                [ops.inv(-ops.kd[a] * ops.kd[b] * Fh * sym) for a in range(3) for b in range(3)]
            )
        return _lp(quad, grid, p / 2.0), _lp(grads, grid, p)

    res = ordered_map(rung, list(epsilons))
    qn = [r[0] for r in res]
    gn = [r[1] for r in res]
    qs = loglog_fit(epsilons, qn)[0] if min(qn) > 0 else math.inf
    gs = loglog_fit(epsilons, gn)[0] if min(gn) > 0 else math.inf
    return CommutatorBoundReport(list(epsilons), qn, gn, qs, gs, 2 * theta, theta - k, slack, k)


@dataclass(frozen=True)
class ProductReport:
    lhs: float
    rhs: float
    ratio: float


def verify_product_h_half(f: Field, g: Field) -> ProductReport:
    """Empirical constant in ``||fg|| <= ||f||_inf ||g||_2 + ||g||_inf [f] + ||f||_inf [g]``.

    ``||.||_2`` is the root-mean-square (so that it shares the Fourier
    normalisation of ``[.]``) and ``||fg|| = ||fg||_2 + [fg]``.
    """
    if f.rank != 0 or g.rank != 0:
        raise InvalidParams("product inequality is checked for scalar fields")
    if f.grid != g.grid:
        raise InvalidParams("f and g live on different grids")
    rms = lambda v: math.sqrt(float(np.mean(v**2)))  # noqa: E731
    fg = f.with_values(f.values * g.values)
    lhs = rms(fg.values) + h_half_seminorm_fourier(fg).value
    finf, ginf = float(np.max(np.abs(f.values))), float(np.max(np.abs(g.values)))
    rhs = finf * rms(g.values) + ginf * h_half_seminorm_fourier(f).value + finf * h_half_seminorm_fourier(g).value
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return ProductReport(lhs, rhs, ratio)


# ---------------------------------------------------------------------------
# time-series diagnostics


class ConservedFlag:
    """Returned in place of an estimate when the helicity series is constant."""

    def __repr__(self):
        return "ConservedFlag()"

    def __eq__(self, other):
        return isinstance(other, ConservedFlag)

    def __hash__(self):
        return hash(ConservedFlag)


CONSERVED = ConservedFlag()


def _series(series, min_len=256):
    H = np.asarray(series, dtype=float).ravel()
    if H.size < min_len:
        raise InvalidParams(f"need at least {min_len} time samples")
    if not np.all(np.isfinite(H)):
        raise InvalidParams("series contains non-finite values")
    return H


@dataclass(frozen=True)
class HolderEstimate:
    sigma: float
    r_squared: float
    lags: tuple
    increments: tuple


def holder_exponent_estimate(series, dt=1.0):
    """Slope of ``max_t |H(t + tau) - H(t)|`` against ``tau`` on dyadic lags, clipped to [0, 1]."""
    H = _series(series)
    if np.all(H == H[0]):
        return CONSERVED
    lags = []
    lag = 1
    while lag <= H.size // 8:
        lags.append(lag)
        lag *= 2
    M = np.array([np.max(np.abs(H[l:] - H[:-l])) for l in lags])
    keep = M > 0
    if keep.sum() < 2:
        return CONSERVED
    tau = np.array(lags, float)[keep] * dt
    slope, _, r2 = loglog_fit(tau, M[keep])
    return HolderEstimate(float(min(max(slope, 0.0), 1.0)), r2, tuple(tau), tuple(M[keep]))


@dataclass(frozen=True)
class BoxCount:
    dimension: float
    box_sizes: tuple
    counts: tuple


def support_dimension_boxcount(series, threshold, dt=1.0):
    """Box-counting dimension of ``{t : |dH/dt| > threshold}`` on dyadic boxes."""
    H = _series(series)
    if np.all(H == H[0]):
        return CONSERVED
    rate = np.abs(np.diff(H)) / dt
    active = rate > threshold
    n = active.size
    if not active.any():
        return BoxCount(0.0, (), ())
    sizes, counts = [], []
    s = 1
    while s <= n // 4:
        nb = -(-n // s)
        padded = np.zeros(nb * s, bool)
        padded[:n] = active
        counts.append(int(padded.reshape(nb, s).any(axis=1).sum()))
        sizes.append(s)
        s *= 2
    dim = -loglog_fit(np.array(sizes, float), np.array(counts, float))[0]
    return BoxCount(float(dim), tuple(sizes), tuple(counts))


def dimension_consistency(sigma, dimension, slack=0.3):
    """Diagnostic comparison ``d >= (2 sigma - 1)/(1 - sigma) - slack`` (only meaningful for sigma > 1/2)."""
    if not (sigma > 0.5) or sigma >= 1.0:
        return {"applicable": False, "bound": None, "consistent": None}
    bound = (2 * sigma - 1) / (1 - sigma)
    return {"applicable": True, "bound": bound, "consistent": bool(dimension >= bound - slack)}
