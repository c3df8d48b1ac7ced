import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from helidefect.calculus import (
    SpaceTimeTest,
    TimeBump,
    curl,
    default_test_battery,
    divergence,
    euler_residual,
    gradient,
    helicity_density,
    laplacian,
    leray_project,
    pressure_from_velocity,
    quintic_bump,
    tensor_divergence,
    total_helicity,
)
from helidefect.errors import InsufficientData
from helidefect.fields_lab import ABC, TaylorGreen, random_trig_field, sample_recipe
from helidefect.grid import GridSpec, ScalarField, VectorField, dot, integrate, reflect

TWO_PI = 2 * math.pi


def test_beltrami(abc64):
    assert np.max(np.abs(curl(abc64).values - abc64.values)) < 1e-12
    u = sample_recipe(ABC(0.3, -1.2, 2.0), GridSpec.torus(32))
    assert np.max(np.abs(curl(u).values - u.values)) < 1e-12


def test_taylor_green_curl_closed_form():
    g = GridSpec.torus(32)
    X, Y, Z = g.mesh()
    w = curl(sample_recipe(TaylorGreen(), g)).values
    # hand-derived: w = (-cos x sin y sin z, -sin x cos y sin z, 2 sin x sin y cos z)
    exact = np.stack(
        [-np.cos(X) * np.sin(Y) * np.sin(Z), -np.sin(X) * np.cos(Y) * np.sin(Z), 2 * np.sin(X) * np.sin(Y) * np.cos(Z)]
    )
    assert np.max(np.abs(w - exact)) < 1e-12


def test_gradient_and_divergence_examples(abc64):
    g = GridSpec.torus(32)
    X, _, _ = g.mesh()
    G = gradient(ScalarField(g, np.cos(X))).values
    assert np.max(np.abs(G[0] + np.sin(X))) < 1e-14
    assert np.max(np.abs(G[1:])) < 1e-14
    assert np.max(np.abs(divergence(abc64).values)) < 1e-12


def test_vector_gradient_layout():
    g = GridSpec.torus(16)
    X, Y, Z = g.mesh()
    u = VectorField(g, np.stack([np.sin(Y), np.zeros(g.dims), np.zeros(g.dims)]))
    G = gradient(u).values
    assert np.max(np.abs(G[0, 1] - np.cos(Y))) < 1e-13
    assert np.max(np.abs(G[1, 0])) < 1e-14


def test_leray_projection_is_solenoidal_and_idempotent(rng):
    g = GridSpec.torus(16)
    u = VectorField(g, rng.standard_normal((3,) + g.dims))
    P = leray_project(u)
    assert np.max(np.abs(divergence(P).values)) < 1e-12
    assert np.max(np.abs(leray_project(P).values - P.values)) < 1e-12


def test_pressure_examples(abc64):
    u2 = np.sum(abc64.values**2, axis=0)
    p = pressure_from_velocity(abc64).values
    assert np.max(np.abs(p - (-u2 / 2 + np.mean(u2 / 2)))) < 1e-11
    assert abs(np.mean(p)) < 1e-13
    g = GridSpec.torus(16)
    _, Y, _ = g.mesh()
    shear = VectorField(g, np.stack([np.sin(Y), np.zeros(g.dims), np.zeros(g.dims)]))
    assert np.max(np.abs(pressure_from_velocity(shear).values)) < 1e-13
    const = VectorField(g, np.stack([np.full(g.dims, c) for c in (1.0, -2.0, 0.5)]))
    assert np.max(np.abs(pressure_from_velocity(const).values)) < 1e-13


def test_pressure_poisson_equation():
    u = random_trig_field(GridSpec.torus(16), kmax=3, seed=4)
    from helidefect.grid import outer

    p = pressure_from_velocity(u)
    rhs = divergence(tensor_divergence(outer(u, u))).values
    lhs = -laplacian(p).values
    assert np.max(np.abs(lhs - rhs)) < 1e-11 * np.max(np.abs(rhs))


def test_helicity_examples(abc64):
    assert total_helicity(abc64) == pytest.approx(3 * TWO_PI**3, rel=1e-10)
    assert abs(total_helicity(sample_recipe(TaylorGreen(), GridSpec.torus(32)))) < 1e-12
    g = GridSpec.torus(16)
    X, Y, Z = g.mesh()
    grad = gradient(ScalarField(g, np.sin(X) * np.cos(2 * Y) + np.sin(Z)))
    assert abs(total_helicity(grad)) < 1e-12
    assert np.allclose(helicity_density(abc64).values, dot(abc64, abc64).values, atol=1e-12)


def test_helicity_grid_refinement():
    g16, g32 = GridSpec.torus(16), GridSpec.torus(32)
    h16 = total_helicity(random_trig_field(g16, kmax=3, seed=9))
    # same band-limited field sampled on the finer grid via zero padding
    from helidefect.grid import to_physical, to_spectral, SpectralField

    F = to_spectral(random_trig_field(g16, kmax=3, seed=9)).coeffs
    big = np.zeros((3,) + g32.dims, complex)
    idx = np.r_[0:8, 24:32]
    sub = np.r_[0:8, 8:16]
    big[np.ix_([0, 1, 2], idx, idx, idx)] = F[np.ix_([0, 1, 2], sub, sub, sub)]
    u32 = to_physical(SpectralField(g32, big, 1))
    assert total_helicity(u32) == pytest.approx(h16, rel=1e-11)


def test_euler_residual_steady_abc():
    g = GridSpec.torus(16)
    u = sample_recipe(ABC(), g)
    p = pressure_from_velocity(u)
    rep = euler_residual([u] * 9, [p] * 9, 0.05)
    assert len(rep.values) == 20
    assert rep.max < 1e-10
    z = VectorField(g, np.zeros((3,) + g.dims))
    zp = ScalarField(g, np.zeros(g.dims))
    assert euler_residual([z] * 3, [zp] * 3, 0.1).max == 0.0


def test_euler_residual_manufactured_forcing():
    g = GridSpec.torus(16)
    u = sample_recipe(ABC(), g)
    p = pressure_from_velocity(u)
    nt = 401
    dt = 1.0 / (nt - 1)
    ts = np.arange(nt) * dt
    us = [VectorField(g, t * u.values) for t in ts]
    ps = [ScalarField(g, t * t * p.values) for t in ts]
    tests = [SpaceTimeTest(u, TimeBump(0.5, 0.4)), SpaceTimeTest(u, TimeBump(0.45, 0.3))]
    rep = euler_residual(us, ps, dt, tests=tests)
    for val, T in zip(rep.values, tests):
        oracle = -quad(T.alpha, 0, 1, points=[T.alpha.center], epsabs=1e-14)[0] * 3 * TWO_PI**3
        assert abs(val - oracle) < 1e-8 * abs(oracle)


def test_euler_residual_needs_three_slices():
    g = GridSpec.torus(8)
    u = sample_recipe(ABC(), g)
    p = pressure_from_velocity(u)
    with pytest.raises(InsufficientData):
        euler_residual([u, u], [p, p], 0.1)


def test_battery_is_solenoidal_and_compact_in_time():
    g = GridSpec.torus(16)
    tests = default_test_battery(g, 0.0, 1.0, seed=3)
    assert len(tests) == 20
    for T in tests:
        assert np.max(np.abs(divergence(T.psi).values)) < 1e-12
        assert T.alpha(0.0) == 0.0 and T.alpha(1.0) == 0.0


def test_quintic_bump_shape():
    s = np.linspace(-1.5, 1.5, 301)
    b = quintic_bump(s)
    assert quintic_bump(0.0) == 1.0
    assert np.all(b[np.abs(s) >= 1] == 0)
    assert np.all(b >= 0)
    assert quad(quintic_bump, -1, 1)[0] == pytest.approx(2 / 3, rel=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_property_div_curl_and_curl_grad(seed):
    g = GridSpec.torus(8)
    u = random_trig_field(g, kmax=3, seed=seed)
    assert np.max(np.abs(divergence(curl(u)).values)) < 1e-12
    phi = ScalarField(g, u.values[0])
    assert np.max(np.abs(curl(gradient(phi)).values)) < 1e-12
    assert np.max(np.abs(divergence(gradient(phi)).values - laplacian(phi).values)) < 1e-11


@given(st.integers(0, 2**31 - 1), st.sampled_from([0, 1, 2]))
def test_property_helicity_parity(seed, axis):
    u = random_trig_field(GridSpec.torus(8), kmax=3, seed=seed)
    h = total_helicity(u)
    assert total_helicity(reflect(u, axis)) == pytest.approx(-h, abs=1e-11 * max(1.0, abs(h)))


@given(st.integers(0, 2**31 - 1))
def test_property_pressure_mean_zero(seed):
    u = random_trig_field(GridSpec.torus(8), kmax=3, seed=seed)
    assert abs(integrate(pressure_from_velocity(u))) < 1e-11
