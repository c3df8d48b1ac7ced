import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from helidefect.calculus import curl
from helidefect.errors import EpsilonUnderResolved, GridMismatch, InsufficientData, InvalidField, InvalidParams
from helidefect.estimators import (
    BesovRegularityEstimator,
    CauchyVorticityTransformer,
    HelicityDefectEstimator,
    MollifierTransformer,
)
from helidefect.fields_lab import ABC, sample_recipe
from helidefect.grid import GridSpec, ScalarField, VectorField
from helidefect.validation import check_field, check_ladder, check_positive, check_seed, check_series


def test_params_round_trip():
    est = HelicityDefectEstimator(kernel="gaussian", tol=0.05)
    assert est.get_params()["kernel"] == "gaussian"
    c = clone(est).set_params(tol=0.1)
    assert c.tol == 0.1 and est.tol == 0.05


def test_mollifier_transformer():
    g = GridSpec.torus(16)
    X, _, _ = g.mesh()
    f = ScalarField(g, np.cos(X))
    out = MollifierTransformer("gaussian", 0.5).fit_transform(f)
    assert np.allclose(out.values, math.exp(-0.125) * np.cos(X), atol=1e-14)
    t = MollifierTransformer().fit(f)
    with pytest.raises(GridMismatch):
        t.transform(ScalarField(GridSpec.torus(8), np.zeros((8, 8, 8))))
    with pytest.raises(NotFittedError):
        MollifierTransformer().transform(f)


def test_defect_estimator_on_abc():
    u = sample_recipe(ABC(), GridSpec.torus(32))
    est = HelicityDefectEstimator().fit(u)
    assert est.verdict_ == "vanishes"
    assert est.pairings_.shape == (len(est.epsilons_), 5)
    with pytest.raises(EpsilonUnderResolved):
        HelicityDefectEstimator(epsilons=[0.8, 0.6, 0.4, 0.1]).fit(u)


def test_besov_estimator():
    g = GridSpec.torus(16)
    X, _, _ = g.mesh()
    est = BesovRegularityEstimator(theta=0.5).fit(ScalarField(g, np.cos(X)))
    assert est.seminorm_ > 0 and est.modulus_[0][1] == est.seminorm_
    assert math.isnan(est.scaling_exponent_)
    h = 2 * math.pi / 16
    est = BesovRegularityEstimator(theta=0.5, increments=tuple(n * h for n in (4, 3, 2, 1.5, 1.2, 1.0))).fit(
        ScalarField(g, np.cos(X))
    )
    assert math.isnan(est.scaling_exponent_)


def test_cauchy_transformer_t0_and_steady():
    u = sample_recipe(ABC(), GridSpec.torus(8))
    w = CauchyVorticityTransformer(t_final=0.1, dt=0.01).fit(u).transform(curl(u))
    assert np.max(np.abs(w.values - u.values)) < 1e-3
    w0 = curl(u)
    assert CauchyVorticityTransformer(t_final=0.0).fit(u).transform(w0) is w0


def test_validation_helpers():
    g = GridSpec.torus(8)
    s = ScalarField(g, np.zeros(g.dims))
    with pytest.raises(InvalidField):
        check_field(np.zeros(3))
    with pytest.raises(InvalidField):
        check_field(s, rank=1)
    with pytest.raises(GridMismatch):
        check_field(ScalarField(GridSpec.slab(8), np.zeros((8, 8, 8))), torus=True)
    with pytest.raises(InsufficientData):
        check_series([s], min_len=2)
    with pytest.raises(GridMismatch):
        check_series([s, ScalarField(GridSpec.torus(4), np.zeros((4, 4, 4)))])
    with pytest.raises(InvalidParams):
        check_positive("dt", -1)
    assert check_positive("dt", 0, allow_zero=True) == 0.0
    with pytest.raises(InvalidParams):
        check_ladder([1.0, 0.5], GridSpec.torus(64))
    assert check_seed(3).integers(100) == np.random.default_rng(3).integers(100)
    assert isinstance(check_series(VectorField(g, np.zeros((3,) + g.dims))), list)
