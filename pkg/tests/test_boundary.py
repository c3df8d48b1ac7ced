import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from helidefect.boundary import (
    SlabDomain,
    boundary_helicity_flux,
    cutoff_chi_r,
    default_alpha_battery,
    distance_field,
    dz,
    full_trace_estimate,
    helicity_budget,
    normal_trace_estimate,
    slab_curl,
    slab_helicity,
    slab_integrate,
    trace_pairing_limit,
)
from helidefect.errors import GridMismatch, InsufficientData, InvalidRadius, ShellUnderResolved, UntrustedTrace
from helidefect.fields_lab import RotatedShear, sample_recipe
from helidefect.grid import GridSpec, ScalarField, VectorField

AREA = (2 * math.pi) ** 2


def slab(nx=16, nz=64):
    return SlabDomain(GridSpec.slab(nx, nx, nz))


def vec(g, a, b, c):
    return VectorField(g, np.stack([np.broadcast_to(v, g.dims).astype(float) for v in (a, b, c)]))


def test_domain_geometry():
    d = slab(8, 20)
    assert d.z_weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert d.z_nodes.min() > 0 and d.z_nodes.max() < 1
    assert d.outer_normal("top") == 1.0 and d.outer_normal("bottom") == -1.0
    with pytest.raises(GridMismatch):
        SlabDomain(GridSpec.torus(8))
    with pytest.raises(ValueError):
        d.outer_normal("side")


def test_dz_fourth_order_exact_on_quartics():
    g = GridSpec.slab(4, 4, 16)
    z = g.coords(2)
    vals = np.broadcast_to(z**4 - 2 * z**3 + z, g.dims)
    assert np.max(np.abs(dz(vals, g) - (4 * z**3 - 6 * z**2 + 1))) < 1e-12
    errs = []
    for n in (32, 64):
        g = GridSpec.slab(4, 4, n)
        z = g.coords(2)
        errs.append(np.max(np.abs(dz(np.broadcast_to(np.sin(3 * z), g.dims), g) - 3 * np.cos(3 * z))))
    assert errs[0] / errs[1] > 14


def test_slab_curl_of_shear():
    g = GridSpec.slab(8, 8, 32)
    u = sample_recipe(RotatedShear(), g)
    _, _, Z = g.mesh()
    w = slab_curl(u).values
    # omega = (-V', U', 0) with U = z^2, V = z
    assert np.max(np.abs(w[0] + 1.0)) < 1e-12
    assert np.max(np.abs(w[1] - 2 * Z)) < 1e-12
    assert np.max(np.abs(w[2])) < 1e-12


def test_slab_quadrature_and_helicity():
    g = GridSpec.slab(8, 8, 16)
    _, _, Z = g.mesh()
    assert slab_integrate(Z**5, g) == pytest.approx(AREA / 6, rel=1e-14)
    u = sample_recipe(RotatedShear(), g)
    # u . omega = V U' - U V' = z^2
    assert slab_helicity(u) == pytest.approx(AREA / 3, rel=1e-13)


def test_cutoff_examples():
    odd = SlabDomain(GridSpec.slab(4, 4, 25))  # node 12 sits at z = 0.5
    prof = cutoff_chi_r(odd, 0.1)
    assert prof.chi.values[0, 0, 12] == 1.0
    assert prof.dchi_dz[12] == 0.0
    d = SlabDomain(GridSpec.slab(4, 4, 50))  # node 2 sits at z = 0.05
    p = cutoff_chi_r(d, 0.1)
    assert p.chi.values[0, 0, 2] == pytest.approx(0.5)
    assert p.dchi_dz[2] == pytest.approx(10.0)
    assert p.gradient.values[2, 1, 1, 2] == pytest.approx(10.0)
    assert np.all(p.gradient.values[:2] == 0)
    assert p.chi.values.min() >= 0 and p.chi.values.max() <= 1
    assert np.all(np.abs(p.dchi_dz) <= 1 / 0.1 + 1e-12)


def test_cutoff_radius_guard():
    d = slab(4, 20)
    for r in (0.05, 0.6, 0.0):
        with pytest.raises(InvalidRadius):
            cutoff_chi_r(d, r)


@given(st.floats(0.05, 0.49), st.sampled_from([32, 50, 64]))
def test_property_cutoff_layer_integrals(r, nz):
    d = slab(4, nz)
    if r <= 2 * d.hz:
        return
    prof = cutoff_chi_r(d, r)
    lower = d.z_nodes < 0.5
    w = np.full(nz, d.hz)  # plain midpoint weights, as the pairing uses
    assert np.sum(prof.dchi_dz[lower] * w[lower]) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(prof.dchi_dz[~lower] * w[~lower]) == pytest.approx(-1.0, abs=1e-12)
    assert np.sum(np.abs(prof.dchi_dz) * w) * d.area == pytest.approx(2 * AREA, rel=1e-12)
    dist = distance_field(d).values[0, 0]
    assert np.array_equal(prof.chi.values[0, 0], np.minimum(dist / r, 1.0))


def test_normal_trace_linear_profile():
    g = GridSpec.slab(16, 16, 128)
    _, _, Z = g.mesh()
    U = vec(g, 0, 0, Z)
    assert np.max(np.abs(normal_trace_estimate(U, "bottom").values)) < 1e-3
    top = normal_trace_estimate(U, "top")
    assert np.max(np.abs(top.values - 1.0)) < 1e-3
    assert top.residual < 1e-12 and len(top.shell_radii) == 3


def test_normal_trace_of_tangent_fields():
    g = GridSpec.slab(16, 16, 64)
    X, Y, Z = g.mesh()
    assert np.all(normal_trace_estimate(vec(g, 1.0, np.sin(X), 0.0), "top").values == 0.0)
    U = vec(g, np.cos(Y), np.sin(X + Y), Z * (1 - Z) * (1 + 0.5 * np.cos(X)))
    for face in ("bottom", "top"):
        assert np.max(np.abs(normal_trace_estimate(U, face).values)) < 1e-3


def test_full_trace_polynomial():
    g = GridSpec.slab(16, 16, 128)
    _, _, Z = g.mesh()
    est = full_trace_estimate(ScalarField(g, Z**2), "top")
    assert np.max(np.abs(est.values - 1.0)) < 1e-3
    assert abs(full_trace_estimate(ScalarField(g, Z**2), "bottom").mean) < 1e-3


def test_trace_horizontal_structure_preserved():
    g = GridSpec.slab(32, 32, 128)
    X, _, Z = g.mesh()
    est = full_trace_estimate(ScalarField(g, np.cos(X) * (1 + Z)), "bottom")
    assert np.max(np.abs(est.values - np.cos(X[:, :, 0]))) < 1e-3


def test_shell_guard():
    d = slab(4, 4)
    with pytest.raises(ShellUnderResolved):
        full_trace_estimate(ScalarField(d.grid, np.zeros(d.grid.dims)), "top", radii=(3, 2, 1))
    with pytest.raises(ShellUnderResolved):
        full_trace_estimate(ScalarField(slab(4, 32).grid, np.zeros((4, 4, 32))), "top", radii=(2, 1))


def test_trace_pairing_examples():
    g = GridSpec.slab(16, 16, 128)
    _, _, Z = g.mesh()
    one = ScalarField(g, np.ones(g.dims))
    rep = trace_pairing_limit(vec(g, 0, 0, Z), one)
    assert rep.rhs == pytest.approx(-AREA, rel=1e-3)
    assert rep.monotone and rep.final_gap < 5e-3 and rep.passed
    assert rep.status == "consistent with trace"
    const = trace_pairing_limit(vec(g, 0, 0, 1.0), one)
    assert abs(const.rhs) < 1e-10 and max(abs(v) for v in const.lhs) < 1e-10
    X, _, _ = g.mesh()
    tangent = trace_pairing_limit(vec(g, np.sin(X), 1.0, 0.0), one)
    assert abs(tangent.rhs) < 1e-10 and max(abs(v) for v in tangent.lhs) < 1e-10


def test_trace_pairing_needs_four_radii():
    g = GridSpec.slab(8, 8, 64)
    one = ScalarField(g, np.ones(g.dims))
    with pytest.raises(InvalidRadius):
        trace_pairing_limit(vec(g, 0, 0, 1.0), one, radii=[0.3, 0.2, 0.1])


def test_flux_examples():
    g = GridSpec.slab(16, 16, 64)
    u = sample_recipe(RotatedShear(), g)
    zero_p = ScalarField(g, np.zeros(g.dims))
    rep = boundary_helicity_flux(u, zero_p)
    assert abs(rep.value) < 1e-8 and rep.tangent and not rep.untrusted
    assert float(boundary_helicity_flux(vec(g, 0, 0, 0), zero_p)) == 0.0
    X, _, _ = g.mesh()
    # u = (0, -cos x, 0) has omega_z = sin x; p chosen so |u|^2/2 - p = 1
    u = vec(g, 0.0, -np.cos(X), 0.0)
    p = ScalarField(g, 0.5 * np.cos(X) ** 2 - 1.0)
    assert abs(boundary_helicity_flux(u, p).value) < 1e-6


def test_flux_oracle_nonzero():
    # omega_z = sin x and Bernoulli head z sin x: the top face gives area/2, the bottom face 0.
    # Half-ball shells also average horizontally, a bias of order (k r)^2 that refinement removes.
    errs = []
    for nz in (64, 128):
        g = GridSpec.slab(16, 16, nz)
        X, _, Z = g.mesh()
        u = vec(g, 0.0, -np.cos(X), 0.0)
        p = ScalarField(g, 0.5 * np.cos(X) ** 2 - Z * np.sin(X))
        errs.append(abs(boundary_helicity_flux(u, p).value - AREA / 2) / (AREA / 2))
    assert errs[0] < 1e-3
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_flux_warns_when_not_tangent():
    g = GridSpec.slab(8, 8, 32)
    _, _, Z = g.mesh()
    with pytest.warns(UntrustedTrace):
        rep = boundary_helicity_flux(vec(g, 0, 0, 1.0 + Z), ScalarField(g, np.zeros(g.dims)))
    assert not rep.tangent


def _shear_series(g, nt, c):
    u = sample_recipe(RotatedShear(), g)
    return [VectorField(g, c(t) * u.values) for t in np.linspace(0, 1, nt)]


def test_budget_steady_shear():
    for nz in (32, 64):
        g = GridSpec.slab(16, 16, nz)
        us = _shear_series(g, 12, lambda t: 1.0)
        ps = [ScalarField(g, np.zeros(g.dims))] * 12
        rep = helicity_budget(us, ps, 1.0 / 11)
        assert np.allclose(rep.helicity, AREA / 3, rtol=1e-13)
        assert np.max(np.abs(rep.flux)) < 1e-8
        assert np.max(np.abs(rep.normalized_residuals)) < 1e-8
        assert rep.rows()[0] == (0.0, rep.helicity[0], rep.flux[0])


def test_budget_zero_and_guards():
    g = GridSpec.slab(8, 8, 16)
    z = [VectorField(g, np.zeros((3,) + g.dims))] * 8
    p = [ScalarField(g, np.zeros(g.dims))] * 8
    rep = helicity_budget(z, p, 0.1)
    assert np.all(rep.helicity == 0) and np.all(rep.flux == 0) and np.all(rep.residuals == 0)
    with pytest.raises(InsufficientData):
        helicity_budget(z[:7], p[:7], 0.1)
    with pytest.raises(InsufficientData):
        helicity_budget(z, p[:6], 0.1)


def test_budget_manufactured_forcing():
    g = GridSpec.slab(16, 16, 32)
    nt = 201
    c = lambda t: 1.0 + 0.1 * t  # noqa: E731
    us = _shear_series(g, nt, c)
    ps = [ScalarField(g, np.zeros(g.dims))] * nt
    rep = helicity_budget(us, ps, 1.0 / (nt - 1))
    K = -AREA / 3  # int (U V' - V U') dV for U = z^2, V = z
    for a, res in zip(default_alpha_battery(0.0, 1.0), rep.residuals):
        forcing = 2 * quad(lambda t: a(t) * c(t) * 0.1, 0, 1, points=[a.center], epsabs=1e-15)[0] * K
        assert abs(res - forcing) < 1e-6


def test_alpha_battery_inside_record():
    for a in default_alpha_battery(0.0, 2.0):
        assert a(0.0) == 0.0 and a(2.0) == 0.0 and a(a.center) == 1.0
