"""Estimator-style wrappers (fit / transform / get_params) over the field diagnostics."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .fields_lab import cauchy_vorticity, flow_map_integrate
from .errors import GridMismatch, InvalidParams
from .mollify import Mollifier, defect_ladder, mollify
from .regularity import BesovParams, besov_modulus, besov_seminorm, c0_proxy, scaling_exponent
from .validation import check_field, check_ladder, check_positive, check_series


class MollifierTransformer(TransformerMixin, BaseEstimator):
    """Spectral mollification at a fixed scale."""

    def __init__(self, kernel="bump", epsilon=0.1):
        self.kernel = kernel
        self.epsilon = epsilon

    def fit(self, X, y=None):
        check_field(X, torus=True)
        m = Mollifier(self.kernel, check_positive("epsilon", self.epsilon))
        m.check(X.grid)
        self.mollifier_ = m
        self.grid_ = X.grid
        return self

    def transform(self, X):
        check_is_fitted(self, "mollifier_")
        check_field(X, torus=True)
        if X.grid != self.grid_:
            raise GridMismatch("field grid differs from the fitted grid")
        return mollify(X, self.mollifier_)


class HelicityDefectEstimator(BaseEstimator):
    """Fits the defect ladder of a velocity snapshot or series.

    After ``fit``: ``ladder_``, ``slope_``, ``verdict_``, ``pairings_``,
    ``extrapolated_`` and ``epsilons_``.
    """

    def __init__(self, epsilons=None, kernel="bump", tol=0.02, dealias=False, dt=None):
        self.epsilons = epsilons
        self.kernel = kernel
        self.tol = tol
        self.dealias = dealias
        self.dt = dt

    def fit(self, X, y=None):
        series = check_series(X, rank=1, torus=True)
        if self.epsilons is not None:
            check_ladder(self.epsilons, series[0].grid)
        u = series[0] if len(series) == 1 else series
        lad = defect_ladder(
            u, epsilons=self.epsilons, kernel=self.kernel, tol=self.tol, dealias=self.dealias, dt=self.dt
        )
        self.ladder_ = lad
        self.epsilons_ = list(lad.epsilons)
        self.slope_ = lad.fitted_slope
        self.verdict_ = lad.verdict
        self.pairings_ = lad.pairings
        self.extrapolated_ = lad.extrapolated_pairing
        return self


class BesovRegularityEstimator(BaseEstimator):
    """Besov seminorm, modulus, vanishing-modulus proxy and increment scaling exponent."""

    def __init__(self, theta=2.0 / 3.0, p=3.0, increments=None):
        self.theta = theta
        self.p = p
        self.increments = increments

    def fit(self, X, y=None):
        check_field(X, torus=True)
        params = BesovParams(self.theta, self.p, self.increments)
        self.seminorm_ = besov_seminorm(X, params).value
        self.modulus_ = besov_modulus(X, params)
        self.c0_proxy_, self.c0_ratio_ = c0_proxy(self.modulus_)
        try:
            fit = scaling_exponent(X, self.p, increments=self.increments)
        except InvalidParams:
            # grid too small for a decade of increments
            self.scaling_exponent_ = self.scaling_r_squared_ = float("nan")
        else:
            self.scaling_exponent_ = fit.exponent
            self.scaling_r_squared_ = fit.r_squared
        return self


class CauchyVorticityTransformer(TransformerMixin, BaseEstimator):
    """``fit`` integrates the flow map of a steady velocity; ``transform`` maps an initial vorticity."""

    def __init__(self, t_final=0.5, dt=1e-3):
        self.t_final = t_final
        self.dt = dt

    def fit(self, X, y=None):
        check_field(X, rank=1, torus=True)
        self.flow_ = flow_map_integrate(X, check_positive("t_final", self.t_final, allow_zero=True), self.dt)
        return self

    def transform(self, X):
        check_is_fitted(self, "flow_")
        check_field(X, rank=1, torus=True)
        return cauchy_vorticity(self.flow_, X)
