"""scikit-learn style wrappers around the flatness and energy cores."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .cloud import WeightedCloud
from .curvature import EnergyParams, SearchParams, energy, energy_tp
from .flatness import default_tangent_radii, scale_record, tangent_estimate


class _CloudMixin:
    def _fit_cloud(self, X, sample_weight):
        X = check_points(X, min_points=self.m + 1)
        self.cloud_ = WeightedCloud(X, sample_weight, self.m)
        self.n_features_in_ = X.shape[1]
        return self.cloud_


class BetaNumbers(_CloudMixin, TransformerMixin, BaseEstimator):
    """Beta (or theta) numbers of the fitted cloud at query centers.

    ``transform(centers)`` returns an array of shape
    ``(n_centers, len(radii))``; the full records of the last call are kept
    in ``records_``.
    """

    def __init__(self, m=1, radii=(0.1, 0.05, 0.025, 0.0125), field="beta"):
        self.m = m
        self.radii = radii
        self.field = field

    def fit(self, X, y=None, sample_weight=None):
        self._fit_cloud(X, sample_weight)
        return self

    def transform(self, X):
        check_is_fitted(self, "cloud_")
        C = check_points(X, name="centers")
        recs = [[scale_record(self.cloud_, c, r) for r in self.radii] for c in C]
        self.records_ = [r for row in recs for r in row]
        return np.array([[getattr(r, self.field) for r in row] for row in recs])


class TangentPlanes(_CloudMixin, TransformerMixin, BaseEstimator):
    """Estimated tangent frames at query points, shape ``(N, n, m)``."""

    def __init__(self, m=1, radii=None, plane="bap"):
        self.m = m
        self.radii = radii
        self.plane = plane

    def fit(self, X, y=None, sample_weight=None):
        cloud = self._fit_cloud(X, sample_weight)
        self.radii_ = (list(self.radii) if self.radii is not None
                       else default_tangent_radii(cloud, 16.0 * cloud.covering_radius))
        return self

    def transform(self, X):
        check_is_fitted(self, "cloud_")
        C = check_points(X, name="points")
        return np.stack([tangent_estimate(self.cloud_, c, self.radii_, self.plane).plane.frame
                         for c in C])


class CurvatureEnergy(_CloudMixin, BaseEstimator):
    """Estimate ``E_p^l`` (or the tangent-point energy with ``kind="tp"``)."""

    def __init__(self, m=1, l=1, p=4.0, kind="menger", mode="monte_carlo", budget=10_000,
                 seed=0, n_random=256, n_refine=4, threads=None):
        self.m = m
        self.l = l
        self.p = p
        self.kind = kind
        self.mode = mode
        self.budget = budget
        self.seed = seed
        self.n_random = n_random
        self.n_refine = n_refine
        self.threads = threads

    def fit(self, X, y=None, sample_weight=None):
        cloud = self._fit_cloud(X, sample_weight)
        if self.kind == "tp":
            est = energy_tp(cloud, self.p, self.mode, self.budget, self.seed, threads=self.threads)
        else:
            est = energy(cloud, EnergyParams(self.p, self.l, self.m), self.mode, self.budget,
                         self.seed, SearchParams(self.n_random, self.n_refine), self.threads)
        self.estimate_ = est
        self.value_ = est.value
        return self
