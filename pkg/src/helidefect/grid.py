"""Sample grids, field containers, discrete Fourier transforms and pointwise algebra.

Fields live on uniform grids that are periodic in some subset of the axes:
all three for the torus, ``x`` and ``y`` for the slab ``T^2 x (0, 1)``.
Periodic axes are sampled at ``i * h``; a non-periodic axis is sampled at
cell centres ``(i + 1/2) * h`` so that no node sits on the boundary.

Discrete Fourier coefficients follow the convention

    f_hat[k] = (1 / N) * sum_x f(x) exp(-i k.x),

where ``N`` is the number of points on the periodic axes, so that a constant
field has ``f_hat[0]`` equal to the constant.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
import scipy.fft

from ._parallel import n_threads
from .errors import AsymmetricSpectrum, GridMismatch, InvalidField, OutOfDomain

AXES = ("x", "y", "z")
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GridSpec:
    """Uniform sample grid on the torus or on the slab."""

    dims: tuple
    lengths: tuple = (TWO_PI, TWO_PI, TWO_PI)
    periodic_axes: tuple = AXES

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(v) for v in self.lengths)
        periodic = tuple(a for a in AXES if a in set(self.periodic_axes))
        if len(dims) != 3 or len(lengths) != 3:
            raise ValueError("dims and lengths must have three entries")
        if any(n < 4 for n in dims):
            raise ValueError(f"every axis needs at least 4 points, got {dims}")
        if any(not (v > 0 and math.isfinite(v)) for v in lengths):
            raise ValueError(f"lengths must be positive and finite, got {lengths}")
        if set(self.periodic_axes) - set(AXES):
            raise ValueError(f"unknown axes in {self.periodic_axes}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "periodic_axes", periodic)

    @classmethod
    def torus(cls, n, length=TWO_PI):
        dims = (n, n, n) if np.isscalar(n) else tuple(n)
        lengths = (length,) * 3 if np.isscalar(length) else tuple(length)
        return cls(dims, lengths, AXES)

    @classmethod
    def slab(cls, nx, ny=None, nz=None, lx=TWO_PI, ly=TWO_PI):
        ny = nx if ny is None else ny
        nz = nx if nz is None else nz
        return cls((nx, ny, nz), (lx, ly, 1.0), ("x", "y"))

    @property
    def shape(self):
        return self.dims

    @property
    def npoints(self):
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.dims))

    @property
    def periodic_mask(self):
        return tuple(a in self.periodic_axes for a in AXES)

    @property
    def is_torus(self):
        return len(self.periodic_axes) == 3

    @property
    def volume(self):
        return self.lengths[0] * self.lengths[1] * self.lengths[2]

    def coords(self, axis):
        h = self.spacing[axis]
        offset = 0.0 if self.periodic_mask[axis] else 0.5
        return (np.arange(self.dims[axis]) + offset) * h

    def mesh(self):
        return np.meshgrid(self.coords(0), self.coords(1), self.coords(2), indexing="ij")

    def axis_weights(self, axis):
        """Quadrature weights along one axis (sum to the axis length)."""
        n, h = self.dims[axis], self.spacing[axis]
        if self.periodic_mask[axis]:
            return np.full(n, h)
        return _cell_centred_weights(n) * self.lengths[axis]

    def cell_weights(self):
        wx, wy, wz = (self.axis_weights(a) for a in range(3))
        if self.is_torus:
            return None
        return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]


@functools.lru_cache(maxsize=None)
def _cell_centred_weights(n):
    """Fourth-order corrected midpoint weights on (0, 1), symmetric end corrections."""
    h = 1.0 / n
    w = np.full(n, h)
    if n < 6:
        return w
    z = (np.arange(n) + 0.5) * h - 0.5
    # unknown corrections c_0..c_2 applied at both ends; exact for even moments 0, 2, 4
    A = np.empty((3, 3))
    b = np.empty(3)
    base = w.copy()
    for row, m in enumerate((0, 2, 4)):
        exact = 2.0 * 0.5 ** (m + 1) / (m + 1)
        b[row] = exact - np.sum(base * z**m)
        for j in range(3):
            A[row, j] = h * (z[j] ** m + z[n - 1 - j] ** m)
    c = np.linalg.solve(A, b)
    for j in range(3):
        w[j] += h * c[j]
        w[n - 1 - j] += h * c[j]
    w.flags.writeable = False
    return w


def _freeze(values):
    arr = np.asarray(values, dtype=np.float64)
    arr = arr.view()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a scalar, vector or tensor quantity on a grid.

    ``values`` has shape ``(*component_shape, Nx, Ny, Nz)``; index order is
    ``ij`` so axis ``-3`` is ``x``.
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    rank: ClassVar[int] = 0

    def __post_init__(self):
        arr = _freeze(self.values)
        expected = self.component_shape + self.grid.dims
        if arr.shape != expected:
            raise InvalidField(f"{type(self).__name__} expects shape {expected}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidField("field contains non-finite values")
        object.__setattr__(self, "values", arr)

    @classmethod
    def _component_shape(cls):
        return (3,) * cls.rank

    @property
    def component_shape(self):
        return self._component_shape()

    @property
    def ncomp(self):
        return 3**self.rank

    @property
    def components(self):
        return self.values.reshape((self.ncomp,) + self.grid.dims)

    def with_values(self, values):
        return type(self)(self.grid, values)

    def _check(self, other):
        if not isinstance(other, Field):
            return
        if other.grid != self.grid:
            raise GridMismatch(f"{self.grid} != {other.grid}")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            if other.rank != self.rank:
                raise GridMismatch("cannot add fields of different rank")
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            return self + (-other)
        return self.with_values(self.values - other)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, scalar):
        if isinstance(scalar, Field):
            return NotImplemented
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


class ScalarField(Field):
    rank = 0


class VectorField(Field):
    rank = 1


class TensorField(Field):
    rank = 2

    def transpose(self):
        return TensorField(self.grid, np.swapaxes(self.values, 0, 1))


FIELD_TYPES = {0: ScalarField, 1: VectorField, 2: TensorField}


def field_of_rank(rank, grid, values):
    return FIELD_TYPES[rank](grid, values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex Fourier coefficients, full (not half) spectrum on the periodic axes."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)
    rank: int = 0

    def wavenumbers(self):
        return full_wavenumbers(self.grid)


def full_wavenumbers(grid):
    """Physical wavenumbers in FFT ordering; zero along non-periodic axes."""
    ks = []
    for a in range(3):
        n, L = grid.dims[a], grid.lengths[a]
        if grid.periodic_mask[a]:
            k = scipy.fft.fftfreq(n, d=1.0 / n) * (TWO_PI / L)
        else:
            k = np.zeros(n)
        shape = [1, 1, 1]
        shape[a] = n
        ks.append(k.reshape(shape))
    return ks


def _periodic_axes(grid, rank):
    lead = rank
    return tuple(lead + a for a in range(3) if grid.periodic_mask[a])


def _n_periodic(grid):
    return int(np.prod([grid.dims[a] for a in range(3) if grid.periodic_mask[a]]))


def to_spectral(f: Field) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        raise InvalidField("field contains non-finite values")
    axes = _periodic_axes(f.grid, f.rank)
    coeffs = scipy.fft.fftn(f.values, axes=axes, workers=n_threads()) / _n_periodic(f.grid)
    return SpectralField(f.grid, coeffs, f.rank)


def hermitian_defect(F: SpectralField) -> float:
    """max |F[k] - conj(F[-k])| over the periodic axes."""
    axes = _periodic_axes(F.grid, F.rank)
    mirrored = np.roll(np.flip(F.coeffs, axis=axes), 1, axis=axes)
    return float(np.max(np.abs(F.coeffs - np.conj(mirrored)))) if F.coeffs.size else 0.0


def to_physical(F: SpectralField, tol=1e-12) -> Field:
    scale = max(1.0, float(np.max(np.abs(F.coeffs))) if F.coeffs.size else 0.0)
    defect = hermitian_defect(F)
    if defect > tol * scale:
        raise AsymmetricSpectrum(f"Hermitian symmetry violated by {defect:.3e}")
    axes = _periodic_axes(F.grid, F.rank)
    values = scipy.fft.ifftn(F.coeffs * _n_periodic(F.grid), axes=axes, workers=n_threads())
    return field_of_rank(F.rank, F.grid, values.real)


class SpectralOps:
    """Real-to-complex transforms and wavenumbers for one grid (internal workhorse).

    Uses the half spectrum along the last periodic axis. ``kd`` has the
    Nyquist wavenumber zeroed so odd-order derivatives stay real.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.axes = tuple(a for a in range(3) if grid.periodic_mask[a])
        if not self.axes:
            raise GridMismatch("grid has no periodic axis")
        last = self.axes[-1]
        k, kd = [], []
        spec_shape = list(grid.dims)
        for a in range(3):
            n, L = grid.dims[a], grid.lengths[a]
            shape = [1, 1, 1]
            if a in self.axes:
                if a == last:
                    idx = np.arange(n // 2 + 1)
                    spec_shape[a] = n // 2 + 1
                else:
                    idx = scipy.fft.fftfreq(n, d=1.0 / n)
                ka = idx * (TWO_PI / L)
                kda = ka.copy()
                if n % 2 == 0:
                    kda[np.abs(idx) == n // 2] = 0.0
                shape[a] = ka.size
                k.append(ka.reshape(shape))
                kd.append(kda.reshape(shape))
            else:
                k.append(np.zeros(shape))
                kd.append(np.zeros(shape))
        self.k = k
        self.kd = kd
        self.spec_shape = tuple(spec_shape)
        self.k2 = kd[0] ** 2 + kd[1] ** 2 + kd[2] ** 2
        self.kmag = np.sqrt(k[0] ** 2 + k[1] ** 2 + k[2] ** 2)
        self.sizes = tuple(grid.dims[a] for a in self.axes)

    def _axes(self, ndim):
        return tuple(ndim - 3 + a for a in self.axes)

    def fwd(self, values):
        return scipy.fft.rfftn(values, axes=self._axes(values.ndim), workers=n_threads())

    def inv(self, coeffs):
        return scipy.fft.irfftn(
            coeffs, s=self.sizes, axes=self._axes(coeffs.ndim), workers=n_threads()
        )

    def deriv(self, values, axis):
        if axis not in self.axes:
            raise GridMismatch(f"axis {AXES[axis]} is not periodic")
        return self.inv(1j * self.kd[axis] * self.fwd(values))

    def apply(self, values, multiplier):
        return self.inv(multiplier * self.fwd(values))


@functools.lru_cache(maxsize=16)
def spectral_ops(grid: GridSpec) -> SpectralOps:
    return SpectralOps(grid)


# ---------------------------------------------------------------------------
# pointwise algebra


def _require_same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise GridMismatch(f"{a.grid} != {b.grid}")


def _resize_spectrum(F, new_dims, axes):
    """Copy low modes of a full complex spectrum into a larger or smaller grid."""
    out_shape = list(F.shape)
    for ax, n in zip(axes, new_dims):
        out_shape[ax] = n
    out = np.zeros(out_shape, dtype=complex)
    src = [slice(None)] * F.ndim
    dst = [slice(None)] * F.ndim
    pieces = [([], [])]
    for ax, n_new in zip(axes, new_dims):
        n_old = F.shape[ax]
        m = min(n_old, n_new)
        half = (m - 1) // 2  # drop Nyquist of the smaller grid
        lo = (slice(0, half + 1), slice(0, half + 1))
        hi = (slice(n_old - half, n_old), slice(n_new - half, n_new)) if half > 0 else None
        new_pieces = []
        for s_list, d_list in pieces:
            new_pieces.append((s_list + [(ax, lo[0])], d_list + [(ax, lo[1])]))
            if hi is not None:
                new_pieces.append((s_list + [(ax, hi[0])], d_list + [(ax, hi[1])]))
        pieces = new_pieces
    for s_list, d_list in pieces:
        s = list(src)
        d = list(dst)
        for ax, sl in s_list:
            s[ax] = sl
        for ax, sl in d_list:
            d[ax] = sl
        out[tuple(d)] = F[tuple(s)]
    return out


def product_values(a, b, grid: GridSpec, dealias=False):
    """Pointwise product of raw arrays, optionally de-aliased by 3/2 zero padding.

    ``a`` and ``b`` must broadcast against each other.
    """
    if not dealias:
        return a * b
    axes_idx = [a_ for a_ in range(3) if grid.periodic_mask[a_]]
    padded = [(grid.dims[ax] * 3 + 1) // 2 for ax in axes_idx]
    padded = [n + (n % 2) for n in padded]

    def up(v):
        axes = tuple(v.ndim - 3 + ax for ax in axes_idx)
        F = scipy.fft.fftn(v, axes=axes, workers=n_threads())
        G = _resize_spectrum(F, padded, axes)
        scale = np.prod(padded) / np.prod([grid.dims[ax] for ax in axes_idx])
        return scipy.fft.ifftn(G * scale, axes=axes, workers=n_threads()).real

    prod = up(np.asarray(a, dtype=float)) * up(np.asarray(b, dtype=float))
    axes = tuple(prod.ndim - 3 + ax for ax in axes_idx)
    P = scipy.fft.fftn(prod, axes=axes, workers=n_threads())
    Q = _resize_spectrum(P, [grid.dims[ax] for ax in axes_idx], axes)
    scale = np.prod([grid.dims[ax] for ax in axes_idx]) / np.prod(padded)
    return scipy.fft.ifftn(Q * scale, axes=axes, workers=n_threads()).real


def dot(a: Field, b: Field, dealias=False) -> ScalarField:
    _require_same_grid(a, b)
    if a.rank != 1 or b.rank != 1:
        raise GridMismatch("dot needs two vector fields")
    out = sum(product_values(a.values[i], b.values[i], a.grid, dealias) for i in range(3))
    return ScalarField(a.grid, out)


def cross(a: Field, b: Field, dealias=False) -> VectorField:
    _require_same_grid(a, b)
    if a.rank != 1 or b.rank != 1:
        raise GridMismatch("cross needs two vector fields")
    u, v = a.values, b.values
    g = a.grid
    out = np.empty_like(u)
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        out[i] = product_values(u[j], v[k], g, dealias) - product_values(u[k], v[j], g, dealias)
    return VectorField(g, out)


def outer(a: Field, b: Field, dealias=False) -> TensorField:
    _require_same_grid(a, b)
    if a.rank != 1 or b.rank != 1:
        raise GridMismatch("outer needs two vector fields")
    same = a is b or a.values is b.values
    out = np.empty((3, 3) + a.grid.dims)
    for i in range(3):
        for j in range(3):
            if same and j < i:
                out[i, j] = out[j, i]
            else:
                out[i, j] = product_values(a.values[i], b.values[j], a.grid, dealias)
    return TensorField(a.grid, out)


def scale(a: Field, b) -> Field:
    """Multiply ``a`` by a real number or pointwise by a scalar field."""
    if isinstance(b, ScalarField):
        _require_same_grid(a, b)
        return a.with_values(a.values * b.values)
    return a.with_values(a.values * float(b))


def add(a: Field, b: Field) -> Field:
    return a + b


_OPS = {"dot": dot, "cross": cross, "outer": outer, "scale": scale, "add": add}


def pointwise(op: str, a: Field, b, **kwargs) -> Field:
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown pointwise op {op!r}; choose from {sorted(_OPS)}") from None
    return fn(a, b, **kwargs)


def norm(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, np.sqrt(np.sum(u.values**2, axis=0)))


def integrate(f: Field) -> float:
    """Integral over the domain; mean times volume on the torus.

    Vector and tensor fields are integrated componentwise and an array is returned.
    """
    if not np.all(np.isfinite(f.values)):
        raise InvalidField("field contains non-finite values")
    w = f.grid.cell_weights()
    comps = f.components
    if w is None:
        h = f.grid.spacing
        totals = [np.add.reduce(c.ravel()) * (h[0] * h[1] * h[2]) for c in comps]
    else:
        totals = [np.add.reduce((c * w).ravel()) for c in comps]
    if f.rank == 0:
        return float(totals[0])
    return np.array(totals).reshape(f.component_shape)


def lp_norm(values, grid: GridSpec, p) -> float:
    """L^p norm of raw samples (Euclidean norm over leading component axes)."""
    values = np.asarray(values)
    if values.ndim > 3:
        mag = np.sqrt(np.sum(values.reshape((-1,) + grid.dims) ** 2, axis=0))
    else:
        mag = np.abs(values)
    if np.isinf(p):
        return float(mag.max())
    w = grid.cell_weights()
    if w is None:
        h = grid.spacing
        w = h[0] * h[1] * h[2]
    return float(np.add.reduce((mag**p * w).ravel()) ** (1.0 / p))


def reflect(u: Field, axis=0) -> Field:
    """Mirror image under x_axis -> -x_axis (vector components transform as vectors)."""
    if not u.grid.periodic_mask[axis]:
        raise GridMismatch("reflection is defined along periodic axes only")
    ax = u.values.ndim - 3 + axis
    vals = np.roll(np.flip(u.values, axis=ax), 1, axis=ax).copy()
    if u.rank >= 1:
        vals[axis] *= -1.0
    if u.rank == 2:
        vals[:, axis] *= -1.0
    return u.with_values(vals)


# ---------------------------------------------------------------------------
# interpolation


def fold_points(grid: GridSpec, points):
    """Wrap points into the periodic box; reject points outside a bounded axis."""
    pts = np.array(points, dtype=float, ndmin=2)
    if pts.shape[-1] != 3:
        raise ValueError("points must have shape (n, 3)")
    for a in range(3):
        if grid.periodic_mask[a]:
            pts[:, a] = np.mod(pts[:, a], grid.lengths[a])
        elif np.any((pts[:, a] < 0.0) | (pts[:, a] > grid.lengths[a])):
            raise OutOfDomain(f"point outside the {AXES[a]} extent (0, {grid.lengths[a]})")
    return pts


class TrigInterpolant:
    """Evaluates the trigonometric interpolant of a field at arbitrary points.

    Coefficients smaller than ``prune`` times the largest are dropped, so
    spectrally sparse fields (analytic recipes) evaluate in O(points * modes).
    On the slab the interpolant is trigonometric in ``x, y`` and cubic
    Lagrange in ``z``.
    """

    def __init__(self, f: Field, prune=1e-13, derivatives=False):
        self.grid = g = f.grid
        self.ncomp = f.ncomp
        self.component_shape = f.component_shape
        self.derivatives = derivatives
        per = [a for a in range(3) if g.periodic_mask[a]]
        self.periodic = per
        npts = int(np.prod([g.dims[a] for a in per]))
        comps = f.components
        axes = tuple(1 + a for a in per)
        F = scipy.fft.fftn(comps, axes=axes, workers=n_threads()) / npts
        # F shape (ncomp, Nx, Ny, Nz); on the slab the z axis stays physical
        full_k = full_wavenumbers(g)
        nyq = []
        for a in range(3):
            n = g.dims[a]
            idx = scipy.fft.fftfreq(n, d=1.0 / n)
            mask = (np.abs(idx) == n // 2) & (n % 2 == 0) & g.periodic_mask[a]
            shape = [1, 1, 1]
            shape[a] = n
            nyq.append(mask.reshape(shape))
        mag = np.max(np.abs(F), axis=0 if g.is_torus else (0, 3))
        thresh = prune * mag.max() if mag.size and mag.max() > 0 else 0.0
        keep = mag > thresh
        if not g.is_torus:
            idx = np.nonzero(keep)
            self.kvec = np.stack(
                [full_k[0][:, 0, 0][idx[0]], full_k[1][0, :, 0][idx[1]], np.zeros(idx[0].size)],
                axis=1,
            )
            self.nyq = np.stack(
                [nyq[0][:, 0, 0][idx[0]], nyq[1][0, :, 0][idx[1]], np.zeros(idx[0].size, bool)],
                axis=1,
            )
            # coefficient table (modes, ncomp, Nz)
            self.coef = np.transpose(F[:, idx[0], idx[1], :], (1, 0, 2))
        else:
            idx = np.nonzero(keep)
            self.kvec = np.stack(
                [full_k[0][:, 0, 0][idx[0]], full_k[1][0, :, 0][idx[1]], full_k[2][0, 0, :][idx[2]]],
                axis=1,
            )
            self.nyq = np.stack(
                [nyq[0][:, 0, 0][idx[0]], nyq[1][0, :, 0][idx[1]], nyq[2][0, 0, :][idx[2]]], axis=1
            )
            self.coef = F[:, idx[0], idx[1], idx[2]].T  # (modes, ncomp)
        if derivatives:
            kd = np.where(self.nyq, 0.0, self.kvec)
            # (modes, ncomp, 3) coefficients of d/dx_j
            if g.is_torus:
                self.dcoef = 1j * self.coef[:, :, None] * kd[:, None, :]
            else:
                self.dcoef = 1j * self.coef[:, :, None, :] * kd[:, None, :, None]

    @property
    def n_modes(self):
        return self.kvec.shape[0]

    def _basis(self, pts):
        phase = np.zeros((pts.shape[0], self.n_modes))
        nyq_axes = []
        for a in self.periodic:
            k = np.where(self.nyq[:, a], 0.0, self.kvec[:, a])
            phase += np.outer(pts[:, a], k)
            if self.nyq[:, a].any():
                nyq_axes.append(a)
        B = np.exp(1j * phase)
        for a in nyq_axes:
            cols = self.nyq[:, a]
            B[:, cols] *= np.cos(np.outer(pts[:, a], self.kvec[cols, a]))
        return B

    def __call__(self, points, chunk=2048):
        """Values with shape ``(n, *component_shape)``; with ``derivatives`` also
        the gradient with shape ``(n, *component_shape, 3)``."""
        pts = fold_points(self.grid, points)
        n = pts.shape[0]
        vals = np.empty((n, self.ncomp))
        grads = np.empty((n, self.ncomp, 3)) if self.derivatives else None
        for s in range(0, n, chunk):
            p = pts[s : s + chunk]
            B = self._basis(p)
            if self.grid.is_torus:
                vals[s : s + chunk] = (B @ self.coef).real
                if self.derivatives:
                    d = np.tensordot(B, self.dcoef, axes=(1, 0))
                    grads[s : s + chunk] = d.real
            else:
                w, j0 = _lagrange_weights(p[:, 2], self.grid)
                layers = np.tensordot(B, self.coef, axes=(1, 0)).real  # (n, ncomp, Nz)
                sel = np.take_along_axis(layers, (j0[:, None, None] + np.arange(4)), axis=2)
                vals[s : s + chunk] = np.einsum("pcj,pj->pc", sel, w)
                if self.derivatives:
                    dl = np.tensordot(B, self.dcoef, axes=(1, 0)).real  # (n, ncomp, 3, Nz)
                    idx = (j0[:, None, None, None] + np.arange(4))
                    seld = np.take_along_axis(dl, idx, axis=3)
                    gz = np.einsum("pcj,pj->pc", sel, _lagrange_dweights(p[:, 2], self.grid, j0))
                    g = np.einsum("pcaj,pj->pca", seld, w)
                    g[:, :, 2] = gz
                    grads[s : s + chunk] = g
        shape = (n,) + self.component_shape
        vals = vals.reshape(shape)
        if self.derivatives:
            return vals, grads.reshape(shape + (3,))
        return vals


def _lagrange_stencil(z, grid):
    h = grid.spacing[2]
    nz = grid.dims[2]
    pos = z / h - 0.5
    j0 = np.clip(np.floor(pos).astype(int) - 1, 0, nz - 4)
    return pos, j0


def _lagrange_weights(z, grid):
    pos, j0 = _lagrange_stencil(z, grid)
    nodes = j0[:, None] + np.arange(4)
    w = np.ones((z.size, 4))
    for m in range(4):
        for q in range(4):
            if q != m:
                w[:, m] *= (pos - nodes[:, q]) / (nodes[:, m] - nodes[:, q])
    return w, j0


def _lagrange_dweights(z, grid, j0):
    pos, _ = _lagrange_stencil(z, grid)
    h = grid.spacing[2]
    nodes = j0[:, None] + np.arange(4)
    dw = np.zeros((z.size, 4))
    for m in range(4):
        for r in range(4):
            if r == m:
                continue
            term = np.ones(z.size) / (nodes[:, m] - nodes[:, r])
            for q in range(4):
                if q not in (m, r):
                    term *= (pos - nodes[:, q]) / (nodes[:, m] - nodes[:, q])
            dw[:, m] += term
    return dw / h


def _trilinear(f: Field, pts):
    g = f.grid
    comps = f.components
    idx0, frac = [], []
    for a in range(3):
        h = g.spacing[a]
        if g.periodic_mask[a]:
            pos = pts[:, a] / h
            i0 = np.floor(pos).astype(int)
            idx0.append((i0 % g.dims[a], (i0 + 1) % g.dims[a]))
            frac.append(pos - i0)
        else:
            pos = pts[:, a] / h - 0.5
            i0 = np.clip(np.floor(pos).astype(int), 0, g.dims[a] - 2)
            idx0.append((i0, i0 + 1))
            frac.append(pos - i0)
    out = np.zeros((pts.shape[0], comps.shape[0]))
    for bx in (0, 1):
        wx = frac[0] if bx else 1.0 - frac[0]
        for by in (0, 1):
            wy = frac[1] if by else 1.0 - frac[1]
            for bz in (0, 1):
                wz = frac[2] if bz else 1.0 - frac[2]
                vals = comps[:, idx0[0][bx], idx0[1][by], idx0[2][bz]].T
                out += (wx * wy * wz)[:, None] * vals
    return out


def sample_at(f: Field, points, method="spectral") -> np.ndarray:
    """Evaluate ``f`` at points; returns shape ``(n, *component_shape)``."""
    if method == "spectral":
        return TrigInterpolant(f)(points)
    if method == "trilinear":
        pts = fold_points(f.grid, points)
        return _trilinear(f, pts).reshape((pts.shape[0],) + f.component_shape)
    raise ValueError(f"unknown method {method!r}")
