"""Analytic and synthetic velocity fields, flow maps and the Cauchy vorticity formula."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ._parallel import ordered_map
from .calculus import leray_project
from .errors import DomainMismatch, GridMismatch, InvalidParams, NeedBackwardFlow, StepTooLarge
from .grid import GridSpec, TrigInterpolant, VectorField, spectral_ops

# ---------------------------------------------------------------------------
# recipes


@dataclass(frozen=True)
class ABC:
    A: float = 1.0
    B: float = 1.0
    C: float = 1.0


@dataclass(frozen=True)
class TaylorGreen:
    amplitude: float = 1.0


@dataclass(frozen=True)
class RotatedShear:
    """Horizontal shear ``(U(z), V(z), 0)`` on the slab.

    Profiles are polynomial coefficients in ascending powers of ``z``;
    the default ``U = z^2``, ``V = z`` turns the flow direction with height.
    """

    U: tuple = (0.0, 0.0, 1.0)
    V: tuple = (0.0, 1.0)


@dataclass(frozen=True)
class SyntheticBesov:
    theta: float
    seed: int = 0
    spectrum_slope: Optional[float] = None
    c0_log_decay: bool = False


@dataclass(frozen=True)
class Gradient:
    """``u = grad(phi)`` with ``phi = amplitude * sin(x) sin(y) sin(z)``; curl free, not solenoidal."""

    amplitude: float = 1.0


FieldRecipe = Union[ABC, TaylorGreen, RotatedShear, SyntheticBesov, Gradient]
RECIPES = {"abc": ABC, "taylor_green": TaylorGreen, "shear": RotatedShear, "besov": SyntheticBesov, "gradient": Gradient}


def _check_recipe(r):
    for name, value in vars(r).items():
        vals = value if isinstance(value, tuple) else (value,)
        for v in vals:
            if isinstance(v, (int, float)) and not isinstance(v, bool) and not math.isfinite(v):
                raise InvalidParams(f"recipe parameter {name} is not finite")
    if isinstance(r, SyntheticBesov) and not 0.0 < r.theta < 1.0:
        raise InvalidParams("theta must lie in (0, 1)")


def _polyval(coefs, z):
    return np.polynomial.polynomial.polyval(z, np.asarray(coefs, dtype=float))


def sample_recipe(r: FieldRecipe, grid: GridSpec) -> VectorField:
    _check_recipe(r)
    if isinstance(r, RotatedShear):
        if grid.is_torus:
            raise DomainMismatch("the shear recipe lives on the slab")
        X, Y, Z = grid.mesh()
        zero = np.zeros(grid.dims)
        return VectorField(grid, np.stack([_polyval(r.U, Z) + zero, _polyval(r.V, Z) + zero, zero]))
    if not grid.is_torus:
        raise DomainMismatch(f"{type(r).__name__} needs a fully periodic grid")
    if isinstance(r, SyntheticBesov):
        return synth_besov_field(r.theta, r.seed, grid, r.c0_log_decay, r.spectrum_slope)
    X, Y, Z = grid.mesh()
    if isinstance(r, ABC):
        vals = [
            r.A * np.sin(Z) + r.C * np.cos(Y),
            r.B * np.sin(X) + r.A * np.cos(Z),
            r.C * np.sin(Y) + r.B * np.cos(X),
        ]
    elif isinstance(r, TaylorGreen):
        a = r.amplitude
        vals = [a * np.sin(X) * np.cos(Y) * np.cos(Z), -a * np.cos(X) * np.sin(Y) * np.cos(Z), 0.0 * X]
    elif isinstance(r, Gradient):
        a = r.amplitude
        vals = [
            a * np.cos(X) * np.sin(Y) * np.sin(Z),
            a * np.sin(X) * np.cos(Y) * np.sin(Z),
            a * np.sin(X) * np.sin(Y) * np.cos(Z),
        ]
    else:
        raise InvalidParams(f"unknown recipe {r!r}")
    return VectorField(grid, np.stack(vals))


def synth_besov_field(theta, seed, grid: GridSpec, c0_log_decay=False, spectrum_slope=None) -> VectorField:
    """Random solenoidal field with Fourier amplitudes ``|k|^-(theta + 3/2)``.

    Gaussian white noise supplies the random phases; ``c0_log_decay`` adds a
    ``1 / log(e + |k|)`` factor so the Besov modulus decays at small scales.
    The result has unit root-mean-square magnitude.
    """
    if not 0.0 < theta < 1.0:
        raise InvalidParams("theta must lie in (0, 1)")
    if not grid.is_torus:
        raise DomainMismatch("synthetic fields are built on the torus")
    slope = -(theta + 1.5) if spectrum_slope is None else float(spectrum_slope)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3,) + grid.dims)
    ops = spectral_ops(grid)
    # wavenumber magnitude in units of the fundamental mode
    kk = np.sqrt(sum((ops.k[a] * grid.lengths[a] / (2.0 * math.pi)) ** 2 for a in range(3)))
    kd_zero = np.zeros(kk.shape, dtype=bool)
    for a in range(3):
        kd_zero = kd_zero | ((ops.kd[a] == 0) & (ops.k[a] != 0))
    amp = np.where((kk > 0) & ~kd_zero, np.power(np.where(kk > 0, kk, 1.0), slope), 0.0)
    if c0_log_decay:
        amp = amp / np.log(math.e + kk)
    u = VectorField(grid, ops.apply(noise, amp))
    u = leray_project(u)
    rms = math.sqrt(float(np.mean(np.sum(u.values**2, axis=0))))
    return VectorField(grid, u.values / rms)


# ---------------------------------------------------------------------------
# flow maps

Velocity = Callable[[np.ndarray, float], tuple]


def rigid_rotation(rate=1.0) -> Velocity:
    """Velocity ``rate * (-y, x, 0)`` and its gradient, as a callable of (points, t)."""
    G = np.array([[0.0, -rate, 0.0], [rate, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def velocity(points, t):
        return points @ G.T, np.broadcast_to(G, (points.shape[0], 3, 3))

    return velocity


def _field_velocity(u):
    if isinstance(u, VectorField):
        interp = TrigInterpolant(u, derivatives=True)
        return lambda pts, t: interp(pts)
    series, sdt = u
    interps = [TrigInterpolant(s, derivatives=True) for s in series]

    def velocity(pts, t):
        # linear interpolation in time between snapshots
        s = min(max(t / sdt, 0.0), len(interps) - 1.0)
        i = min(int(math.floor(s)), len(interps) - 2)
        w = s - i
        v0, g0 = interps[i](pts)
        v1, g1 = interps[i + 1](pts)
        return (1 - w) * v0 + w * v1, (1 - w) * g0 + w * g1

    return velocity


def _rk4(velocity, X, t_final, n_steps, sign, chunk):
    """Integrate ``dX = sign*u(X)``, ``dJ = sign*grad u(X) J`` from the identity."""

    def run(X0):
        X = X0.copy()
        J = np.broadcast_to(np.eye(3), (X.shape[0], 3, 3)).copy()
        if n_steps == 0:
            return X, J
        step = t_final / n_steps

        def f(x, j, t):
            v, g = velocity(x, t if sign > 0 else t_final - t)
            return sign * v, sign * np.matmul(g, j)

        t = 0.0
        for _ in range(n_steps):
            k1x, k1j = f(X, J, t)
            k2x, k2j = f(X + 0.5 * step * k1x, J + 0.5 * step * k1j, t + 0.5 * step)
            k3x, k3j = f(X + 0.5 * step * k2x, J + 0.5 * step * k2j, t + 0.5 * step)
            k4x, k4j = f(X + step * k3x, J + step * k3j, t + step)
            X = X + step / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            J = J + step / 6.0 * (k1j + 2 * k2j + 2 * k3j + k4j)
            t += step
        return X, J

    pieces = [X[s : s + chunk] for s in range(0, X.shape[0], chunk)]
    out = ordered_map(run, pieces)
    return np.concatenate([o[0] for o in out]), np.concatenate([o[1] for o in out])


@dataclass
class FlowMap:
    """Forward positions/Jacobians of the particle lattice at time ``t``.

    ``inverse_positions`` and ``inverse_jacobians`` come from integrating the
    reversed velocity and hold ``X_t^{-1}`` and its gradient at the lattice.
    """

    t: float
    lattice: np.ndarray
    positions: np.ndarray
    jacobians: np.ndarray
    inverse_positions: Optional[np.ndarray] = None
    inverse_jacobians: Optional[np.ndarray] = None
    grid: Optional[GridSpec] = None
    n_steps: int = 0

    def det_jacobian(self):
        return np.linalg.det(self.jacobians)


def flow_map_integrate(u, t_final, dt, particle_lattice=None, backward=True, series_dt=None, chunk=4096):
    """Classical RK4 integration of particle paths and their deformation gradients.

    ``u`` is a steady ``VectorField``, a list of snapshots spaced by
    ``series_dt`` (linearly interpolated in time), or a callable
    ``velocity(points, t) -> (values, gradients)``. The particle lattice
    defaults to the grid nodes.
    """
    if t_final < 0 or dt <= 0:
        raise InvalidParams("need t_final >= 0 and dt > 0")
    grid = None
    if callable(u) and not isinstance(u, VectorField):
        velocity = u
        if particle_lattice is None:
            raise InvalidParams("a callable velocity needs an explicit particle lattice")
    else:
        if isinstance(u, VectorField):
            snaps = [u]
            source = u
        else:
            snaps = list(u)
            if series_dt is None or len(snaps) < 2:
                raise InvalidParams("a velocity series needs series_dt and at least two snapshots")
            source = (snaps, series_dt)
        grid = snaps[0].grid
        if not grid.is_torus:
            raise GridMismatch("flow maps are integrated on the torus")
        umax = max(float(np.max(np.sqrt(np.sum(s.values**2, axis=0)))) for s in snaps)
        limit = min(grid.spacing) / (4.0 * umax) if umax > 0 else math.inf
        if dt > limit * (1.0 + 1e-12):
            raise StepTooLarge(f"dt={dt} exceeds h/(4 |u|_inf) = {limit:.3g}")
        velocity = _field_velocity(source)
    if particle_lattice is None:
        X, Y, Z = grid.mesh()
        particle_lattice = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    lattice = np.asarray(particle_lattice, dtype=float)
    n_steps = int(round(t_final / dt)) if t_final > 0 else 0
    if t_final > 0:
        n_steps = max(n_steps, 1)
    fx, fj = _rk4(velocity, lattice, t_final, n_steps, 1.0, chunk)
    bx = bj = None
    if backward:
        bx, bj = _rk4(velocity, lattice, t_final, n_steps, -1.0, chunk)
    return FlowMap(t_final, lattice, fx, fj, bx, bj, grid, n_steps)


def cauchy_vorticity(flow: FlowMap, omega0: VectorField) -> VectorField:
    """``omega(x, t) = grad X_t(a) omega0(a)`` with ``a = X_t^{-1}(x)`` at each grid node.

    ``grad X_t(a)`` is the inverse of the backward-map gradient at ``x``.
    """
    if flow.inverse_positions is None:
        raise NeedBackwardFlow("flow map was integrated without the backward map")
    if flow.grid is None or flow.grid != omega0.grid:
        raise GridMismatch("flow map and vorticity must share a grid")
    grid = omega0.grid
    if flow.lattice.shape[0] != grid.npoints:
        raise GridMismatch("Cauchy reconstruction needs the grid-node lattice")
    if flow.t == 0:
        return omega0
    w_at = TrigInterpolant(omega0)(flow.inverse_positions)
    forward_grad = np.linalg.inv(flow.inverse_jacobians)
    w = np.einsum("pab,pb->pa", forward_grad, w_at)
    return VectorField(grid, w.T.reshape((3,) + grid.dims))


def random_trig_field(grid: GridSpec, rank=1, kmax=3, modes=6, seed=0, symmetric=True):
    """Random band-limited field with ``|k_a| <= kmax`` (in fundamental units).

    Rank 2 fields are symmetrised when ``symmetric``. Keep ``kmax`` below a
    quarter of the grid so pairwise products stay resolved.
    """
    from .grid import field_of_rank

    if not grid.is_torus:
        raise DomainMismatch("random trigonometric fields are built on the torus")
    rng = np.random.default_rng(seed)
    X, Y, Z = grid.mesh()
    shape = (3,) * rank
    vals = np.zeros(shape + grid.dims)
    for _ in range(modes):
        k = rng.integers(-kmax, kmax + 1, size=3)
        kk = [k[a] * 2.0 * math.pi / grid.lengths[a] for a in range(3)]
        wave = np.cos(kk[0] * X + kk[1] * Y + kk[2] * Z + rng.uniform(0.0, 2.0 * math.pi))
        amp = rng.normal(size=shape)
        vals += amp.reshape(shape + (1, 1, 1)) * wave
    if rank == 2 and symmetric:
        vals = 0.5 * (vals + np.swapaxes(vals, 0, 1))
    return field_of_rank(rank, grid, vals)
