"""Spectral differential operators on the torus and quantities built from them."""

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InsufficientData, InvalidField
from .grid import (
    ScalarField,
    TensorField,
    VectorField,
    dot,
    integrate,
    product_values,
    spectral_ops,
)


def _torus_ops(f):
    if not f.grid.is_torus:
        raise GridMismatch("operator requires a fully periodic grid; use the boundary module on the slab")
    return spectral_ops(f.grid)


def curl(u: VectorField) -> VectorField:
    ops = _torus_ops(u)
    U = ops.fwd(u.values)
    kx, ky, kz = ops.kd
    W = np.empty_like(U)
    W[0] = 1j * (ky * U[2] - kz * U[1])
    W[1] = 1j * (kz * U[0] - kx * U[2])
    W[2] = 1j * (kx * U[1] - ky * U[0])
    return VectorField(u.grid, ops.inv(W))


def divergence(u: VectorField) -> ScalarField:
    ops = _torus_ops(u)
    U = ops.fwd(u.values)
    D = 1j * (ops.kd[0] * U[0] + ops.kd[1] * U[1] + ops.kd[2] * U[2])
    return ScalarField(u.grid, ops.inv(D))


def tensor_divergence(R: TensorField) -> VectorField:
    """Row divergence ``(div R)_i = d_j R_ij``."""
    ops = _torus_ops(R)
    F = ops.fwd(R.values)
    D = 1j * (ops.kd[0] * F[:, 0] + ops.kd[1] * F[:, 1] + ops.kd[2] * F[:, 2])
    return VectorField(R.grid, ops.inv(D))


def gradient(f):
    """Gradient of a scalar (vector result) or of a vector, ``G[i, j] = d_j u_i``."""
    ops = _torus_ops(f)
    F = ops.fwd(f.values)
    G = np.stack([1j * ops.kd[j] * F for j in range(3)], axis=F.ndim - 3)
    vals = ops.inv(G)
    if f.rank == 0:
        return VectorField(f.grid, vals)
    if f.rank == 1:
        return TensorField(f.grid, vals)
    raise InvalidField("gradient of a tensor field is not supported")


def laplacian(f):
    ops = _torus_ops(f)
    return f.with_values(ops.apply(f.values, -ops.k2))


def leray_project(u: VectorField) -> VectorField:
    """Divergence-free part of ``u`` (mean retained)."""
    ops = _torus_ops(u)
    U = ops.fwd(u.values)
    k2 = np.where(ops.k2 > 0, ops.k2, 1.0)
    kdotu = (ops.kd[0] * U[0] + ops.kd[1] * U[1] + ops.kd[2] * U[2]) / k2
    P = np.stack([U[i] - ops.kd[i] * kdotu for i in range(3)])
    return VectorField(u.grid, ops.inv(P))


def pressure_from_velocity(u: VectorField, dealias=False) -> ScalarField:
    """Zero-mean solution of ``-lap p = div div (u (x) u)``."""
    ops = _torus_ops(u)
    g = u.grid
    rhs = 0.0
    for i in range(3):
        for j in range(i, 3):
            uu = ops.fwd(product_values(u.values[i], u.values[j], g, dealias))
            term = -ops.kd[i] * ops.kd[j] * uu
            rhs = rhs + (term if i == j else 2.0 * term)
    k2 = np.where(ops.k2 > 0, ops.k2, 1.0)
    P = np.where(ops.k2 > 0, rhs / k2, 0.0)
    return ScalarField(g, ops.inv(P))


def helicity_density(u: VectorField) -> ScalarField:
    return dot(u, curl(u))


def total_helicity(u: VectorField) -> float:
    return integrate(helicity_density(u))


def energy_density(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, 0.5 * np.sum(u.values**2, axis=0))


# ---------------------------------------------------------------------------
# weak-form residual


def quintic_bump(s):
    """Compactly supported C^2 bump on (-1, 1), peak 1 at 0: (1-|s|)^4 (4|s|+1)."""
    a = np.abs(np.asarray(s, dtype=float))
    return np.where(a < 1.0, (1.0 - a) ** 4 * (4.0 * a + 1.0), 0.0)


@dataclass(frozen=True)
class TimeBump:
    center: float
    half_width: float

    def __call__(self, t):
        return quintic_bump((np.asarray(t, dtype=float) - self.center) / self.half_width)


@dataclass(frozen=True)
class SpaceTimeTest:
    """Test field ``phi(x, t) = alpha(t) psi(x)`` with ``psi`` divergence free."""

    psi: VectorField
    alpha: TimeBump


def default_test_battery(grid, t_start, t_end, n=20, seed=0, modes=3):
    """Curls of random low-mode vector potentials times quintic time bumps."""
    rng = np.random.default_rng(seed)
    X, Y, Z = grid.mesh()
    span = t_end - t_start
    tests = []
    for _ in range(n):
        A = np.zeros((3,) + grid.dims)
        for _m in range(modes):
            k = np.zeros(3)
            while not np.any(k):
                k = rng.integers(-2, 3, size=3)
            amp = rng.normal(size=3)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            kk = [k[a] * 2.0 * np.pi / grid.lengths[a] for a in range(3)]
            wave = np.cos(kk[0] * X + kk[1] * Y + kk[2] * Z + phase)
            A += amp[:, None, None, None] * wave
        psi = curl(VectorField(grid, A)).values.copy()
        psi /= np.max(np.abs(psi))
        center = t_start + span * rng.uniform(0.4, 0.6)
        room = min(center - t_start, t_end - center)
        bump = TimeBump(center, room * rng.uniform(0.6, 0.95))
        tests.append(SpaceTimeTest(VectorField(grid, psi), bump))
    return tests


@dataclass(frozen=True)
class ResidualReport:
    values: np.ndarray
    max: float
    rms: float


def _trapezoid_weights(n, dt):
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def euler_residual(u_series, p_series, dt, tests=None, seed=0, dealias=True) -> ResidualReport:
    """Weak Euler residual ``int int [d_t phi . u + u(x)u : grad phi + p div phi]``.

    The time derivative is moved onto ``u`` (``phi`` vanishes at the ends of
    the window) and discretised with second-order centred differences.
    """
    u_series = list(u_series)
    p_series = list(p_series)
    if len(u_series) < 3:
        raise InsufficientData("euler_residual needs at least 3 time slices")
    if len(p_series) != len(u_series):
        raise InsufficientData("velocity and pressure series differ in length")
    grid = u_series[0].grid
    for f in u_series + p_series:
        if f.grid != grid:
            raise GridMismatch("all slices must share one grid")
    _torus_ops(u_series[0])
    nt = len(u_series)
    times = np.arange(nt) * dt
    if tests is None:
        tests = default_test_battery(grid, times[0], times[-1], seed=seed)
    U = np.stack([u.values for u in u_series])
    dUdt = np.gradient(U, dt, axis=0, edge_order=2)
    weights = _trapezoid_weights(nt, dt)
    h3 = np.prod(grid.spacing)
    # per-slice spatial integrals that do not depend on the test function
    fluxes = []
    for n in range(nt):
        uu = np.empty((3, 3) + grid.dims)
        for i in range(3):
            for j in range(i, 3):
                uu[i, j] = product_values(U[n, i], U[n, j], grid, dealias)
                uu[j, i] = uu[i, j]
        fluxes.append(uu)
    out = np.empty(len(tests))
    for m, test in enumerate(tests):
        grad_psi = gradient(test.psi).values  # [i, j] = d_j psi_i
        div_psi = np.trace(grad_psi)
        alpha = test.alpha(times)
        total = 0.0
        for n in range(nt):
            if alpha[n] == 0.0:
                continue
            s = -np.sum(test.psi.values * dUdt[n])
            s += np.sum(fluxes[n] * grad_psi)
            s += np.sum(p_series[n].values * div_psi)
            total += weights[n] * alpha[n] * s * h3
        out[m] = total
    return ResidualReport(out, float(np.max(np.abs(out))), float(np.sqrt(np.mean(out**2))))
