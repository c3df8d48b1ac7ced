import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helidefect.errors import CostGuard, InvalidParams, PoorFit
from helidefect.fields_lab import ABC, random_trig_field, sample_recipe, synth_besov_field
from helidefect.grid import GridSpec, ScalarField, to_physical, to_spectral
from helidefect.mollify import loglog_fit
from helidefect.regularity import (
    CONSERVED,
    BesovParams,
    besov_modulus,
    besov_seminorm,
    c0_proxy,
    dimension_consistency,
    gagliardo_seminorm_mc,
    h_half_seminorm_fourier,
    holder_exponent_estimate,
    scaling_exponent,
    support_dimension_boxcount,
    verify_commutator_bounds,
    verify_product_h_half,
)

TWO_PI = 2 * math.pi


def cos_field(n, k=1):
    g = GridSpec.torus(n)
    X, _, _ = g.mesh()
    return ScalarField(g, np.cos(k * X))


def test_fourier_seminorm_single_modes():
    assert h_half_seminorm_fourier(cos_field(16)).value_sq == pytest.approx(0.5, abs=1e-12)
    assert h_half_seminorm_fourier(cos_field(16)).value == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert h_half_seminorm_fourier(cos_field(16, 2)).value_sq == pytest.approx(1.0, abs=1e-12)
    g = GridSpec.torus(8)
    assert h_half_seminorm_fourier(ScalarField(g, np.full(g.dims, 3.0))).value == 0.0


def test_fourier_seminorm_odd_grid_and_vectors():
    g = GridSpec((9, 9, 9))
    _, _, Z = g.mesh()
    assert h_half_seminorm_fourier(ScalarField(g, np.sin(3 * Z))).value_sq == pytest.approx(1.5, abs=1e-12)
    u = sample_recipe(ABC(), GridSpec.torus(16))
    # three components, two unit modes each of amplitude 1
    assert h_half_seminorm_fourier(u).value_sq == pytest.approx(3.0, abs=1e-12)


def test_mc_constant_and_guards():
    g = GridSpec.torus(8)
    rep = gagliardo_seminorm_mc(ScalarField(g, np.full(g.dims, 2.0)), samples=10_000)
    assert rep.value == 0.0 and rep.mc_stderr == 0.0
    with pytest.raises(CostGuard):
        gagliardo_seminorm_mc(cos_field(64))
    with pytest.raises(InvalidParams):
        gagliardo_seminorm_mc(cos_field(8), samples=500)


def test_mc_single_mode_matches_fourier():
    rep = gagliardo_seminorm_mc(cos_field(16), samples=40_000, seed=3)
    assert rep.method == "gagliardo_mc" and rep.samples == 40_000
    assert abs(rep.value_sq - 0.5) < 3 * rep.mc_stderr


def test_mc_variance_law():
    f = cos_field(16)
    a = gagliardo_seminorm_mc(f, samples=20_000, seed=1).mc_stderr ** 2
    b = gagliardo_seminorm_mc(f, samples=40_000, seed=1).mc_stderr ** 2
    assert 0.8 < (a / b) / 2.0 < 1.2


def test_mc_reproducible():
    f = random_trig_field(GridSpec.torus(8), rank=0, kmax=2, seed=5)
    a = gagliardo_seminorm_mc(f, samples=10_000, seed=7)
    b = gagliardo_seminorm_mc(f, samples=10_000, seed=7)
    assert a.value == b.value and a.mc_stderr == b.mc_stderr


def _cos_axis_ratio(n, m, theta=2 / 3, p=3):
    # 1-D node sum of |cos(x + s) - cos x|^3 over the n nodes, times the transverse area
    h = TWO_PI / n
    x = np.arange(n) * h
    s = round(m / h) * h
    inc = np.sum(np.abs(2 * np.sin(s / 2) * np.sin(x + s / 2)) ** p) * h * TWO_PI**2
    return inc ** (1 / p) / s**theta


def test_besov_cos_matches_axis_formula():
    n = 64
    f = cos_field(n)
    rep = besov_seminorm(f, BesovParams(2 / 3, 3))
    for row in rep.table:
        assert row["ratio"] == pytest.approx(_cos_axis_ratio(n, row["h"]), abs=1e-10)
    largest = max(r["h"] for r in rep.table)
    assert rep.value == pytest.approx(_cos_axis_ratio(n, largest), abs=1e-10)


def test_besov_constant_and_empty_ladder():
    g = GridSpec.torus(16)
    c = ScalarField(g, np.full(g.dims, 5.0))
    assert besov_seminorm(c, BesovParams(0.5)).value == 0.0
    assert all(v == 0 for _, v in besov_modulus(c, BesovParams(0.5)))
    with pytest.raises(InvalidParams):
        besov_seminorm(c, BesovParams(0.5, increments=()))
    with pytest.raises(InvalidParams):
        BesovParams(1.2)
    with pytest.raises(InvalidParams):
        BesovParams(0.5, p=0.5)


def test_smooth_modulus_rate():
    theta = 2 / 3
    mod = besov_modulus(cos_field(64), BesovParams(theta))
    eps = [e for e, _ in mod]
    ell = [v for _, v in mod]
    assert abs(loglog_fit(eps, ell)[0] - (1 - theta)) < 0.1


def test_c0_proxy_separates_log_decay():
    g = GridSpec.torus(64)
    params = BesovParams(2 / 3)
    with_c0 = c0_proxy(besov_modulus(synth_besov_field(2 / 3, 0, g, c0_log_decay=True), params))[1]
    without = c0_proxy(besov_modulus(synth_besov_field(2 / 3, 0, g), params))[1]
    assert with_c0 < without
    assert c0_proxy([(1.0, 2.0), (0.1, 0.5)]) == (True, 0.25)
    assert c0_proxy([(1.0, 0.0), (0.1, 0.0)]) == (True, 0.0)


def test_scaling_exponent_white_noise_and_smooth():
    g = GridSpec.torus(64)
    h = TWO_PI / 64
    inc = tuple(n * h for n in (16, 12, 8, 6, 4, 3, 2, 1))
    noise = ScalarField(g, np.random.default_rng(0).standard_normal(g.dims))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoorFit)
        fit = scaling_exponent(noise, increments=inc)
    assert abs(fit.exponent) < 0.1
    smooth = scaling_exponent(cos_field(64), increments=tuple(n * h for n in (10, 8, 6, 4, 3, 2, 1)))
    assert smooth.exponent == pytest.approx(1.0, abs=0.05)
    assert smooth.saturated


def test_scaling_exponent_poor_fit_warns_and_needs_decade():
    g = GridSpec.torus(64)
    h = TWO_PI / 64
    noise = ScalarField(g, np.random.default_rng(1).standard_normal(g.dims))
    with pytest.warns(PoorFit):
        fit = scaling_exponent(noise, increments=tuple(n * h for n in (16, 8, 4, 2, 1)))
    assert fit.poor_fit and math.isfinite(fit.exponent)
    with pytest.raises(InvalidParams):
        scaling_exponent(noise, increments=tuple(n * h for n in (8, 6, 4, 3, 2)))


def test_commutator_bounds_smooth_field():
    u = sample_recipe(ABC(), GridSpec.torus(64))
    rep = verify_commutator_bounds(u, theta=2 / 3)
    assert abs(rep.gradient_slope) < 0.1
    assert rep.quadratic_slope > 1.8
    assert rep.passed


def test_product_inequality_examples():
    f = cos_field(32)
    assert verify_product_h_half(f, f).ratio <= 1.5
    g = ScalarField(f.grid, np.full(f.grid.dims, -2.0))
    rep = verify_product_h_half(f, g)
    seminorm = math.sqrt(np.mean(f.values**2)) + h_half_seminorm_fourier(f).value
    assert rep.lhs == pytest.approx(2.0 * seminorm, rel=1e-12)
    assert rep.ratio <= 1.0
    grid = GridSpec.torus(16)
    ratios = [
        verify_product_h_half(
            random_trig_field(grid, rank=0, kmax=3, seed=i), random_trig_field(grid, rank=0, kmax=3, seed=100 + i)
        ).ratio
        for i in range(50)
    ]
    assert all(math.isfinite(r) for r in ratios) and max(ratios) < 10


def _fbm(n, hurst, seed):
    t = np.arange(1, n + 1) / n
    cov = 0.5 * (t[:, None] ** (2 * hurst) + t[None, :] ** (2 * hurst) - np.abs(t[:, None] - t[None, :]) ** (2 * hurst))
    return np.r_[0.0, np.linalg.cholesky(cov) @ np.random.default_rng(seed).standard_normal(n)]


def test_holder_and_dimension_examples():
    t = np.linspace(0, 1, 512)
    assert holder_exponent_estimate(t, t[1]).sigma == pytest.approx(1.0, abs=1e-9)
    assert support_dimension_boxcount(t, 0.5, t[1]).dimension == pytest.approx(1.0, abs=1e-3)
    assert holder_exponent_estimate(np.full(300, 2.5)) == CONSERVED
    assert support_dimension_boxcount(np.full(300, 2.5), 0.1) == CONSERVED
    sigma = holder_exponent_estimate(_fbm(1024, 0.6, 0)).sigma
    assert 0.45 <= sigma <= 0.75
    with pytest.raises(InvalidParams):
        holder_exponent_estimate(t[:100])


def test_dimension_consistency_diagnostic():
    assert dimension_consistency(0.4, 0.2)["applicable"] is False
    d = dimension_consistency(0.75, 1.0)
    assert d["bound"] == pytest.approx(2.0) and d["consistent"] is False
    assert dimension_consistency(0.6, 0.3)["consistent"] is True


@given(st.integers(0, 2**31 - 1), st.floats(-20, 20).filter(lambda c: abs(c) > 1e-3))
def test_property_homogeneity(seed, c):
    f = random_trig_field(GridSpec.torus(8), rank=0, kmax=2, seed=seed)
    cf = ScalarField(f.grid, c * f.values)
    a, b = h_half_seminorm_fourier(f).value, h_half_seminorm_fourier(cf).value
    assert b == pytest.approx(abs(c) * a, rel=1e-12)
    params = BesovParams(0.5, 3, increments=(1.5, 0.8))
    assert besov_seminorm(cf, params).value == pytest.approx(abs(c) * besov_seminorm(f, params).value, rel=1e-12)


def test_mc_homogeneity():
    f = random_trig_field(GridSpec.torus(8), rank=0, kmax=2, seed=2)
    a = gagliardo_seminorm_mc(f, samples=10_000, seed=4).value
    b = gagliardo_seminorm_mc(ScalarField(f.grid, -3.0 * f.values), samples=10_000, seed=4).value
    assert b == pytest.approx(3.0 * a, rel=1e-12)


@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_property_truncation_never_increases(seed, cut):
    g = GridSpec.torus(8)
    f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.dims))
    F = to_spectral(f)
    k = np.fft.fftfreq(8, 1 / 8)
    mask = (np.abs(k)[:, None, None] <= cut) & (np.abs(k)[None, :, None] <= cut) & (np.abs(k)[None, None, :] <= cut)
    truncated = to_physical(type(F)(g, F.coeffs * mask, 0))
    assert h_half_seminorm_fourier(truncated).value <= h_half_seminorm_fourier(f).value + 1e-12


@given(st.integers(0, 2**31 - 1), st.floats(0.1, 0.9))
def test_property_modulus_running_sup(seed, theta):
    f = ScalarField(GridSpec.torus(16), np.random.default_rng(seed).standard_normal((16, 16, 16)))
    ell = [v for _, v in besov_modulus(f, BesovParams(theta))]
    assert all(a >= b for a, b in zip(ell, ell[1:]))
