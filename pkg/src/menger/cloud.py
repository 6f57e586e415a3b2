"""Weighted point samples of an m-dimensional set."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_points, check_weights
from .exceptions import DomainError


@dataclass(frozen=True, eq=False)
class WeightedCloud:
    """Finite sample of a set with quadrature weights for H^m.

    The weighted counting measure ``sum_i weights[i] * delta(points[i])``
    stands in for m-dimensional Hausdorff measure on the set.
    """

    points: np.ndarray
    weights: np.ndarray
    m: int
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = check_points(self.points, name="points")
        w = check_weights(self.weights, P.shape[0])
        if not 1 <= int(self.m) <= P.shape[1]:
            raise DomainError(f"intrinsic dimension m={self.m} must lie in 1..{P.shape[1]}")
        P = P.copy()
        w = w.copy()
        P.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def uniform(cls, points, m, total_measure=None, provenance=""):
        P = np.asarray(points, dtype=np.float64)
        total = float(P.shape[0]) if total_measure is None else float(total_measure)
        return cls(P, np.full(P.shape[0], total / P.shape[0]), m, provenance)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self):
        return self.points.shape[1]

    @property
    def total_weight(self):
        return float(self.weights.sum())

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    @cached_property
    def covering_radius(self):
        """Largest nearest-neighbour gap in the sample.

        Flatness values at radii below about ten times this are limited by
        sampling rather than geometry.
        """
        if len(self) < 2:
            return float("inf")
        d, _ = self.tree.query(self.points, k=2)
        return float(d[:, 1].max())

    def ball(self, x, r):
        """Indices of points in the closed ball, sorted."""
        x = np.asarray(x, dtype=np.float64)
        # the tree's own rounding can drop points lying exactly on the sphere
        pad = r * 1e-9 + 1e-300
        idx = np.array(sorted(self.tree.query_ball_point(x, r + pad)), dtype=np.intp)
        if idx.size == 0:
            return idx
        d = np.linalg.norm(self.points[idx] - x, axis=1)
        return idx[d <= r]

    def open_ball(self, x, r):
        idx = self.ball(x, r)
        d = np.linalg.norm(self.points[idx] - np.asarray(x, dtype=np.float64), axis=1)
        return idx[d < r]

    def subset(self, idx, provenance=None):
        idx = np.asarray(idx)
        return WeightedCloud(self.points[idx], self.weights[idx], self.m,
                             self.provenance if provenance is None else provenance)

    def scaled(self, alpha):
        """The cloud ``alpha * points`` with weights scaled by ``alpha^m``."""
        return WeightedCloud(self.points * alpha, self.weights * alpha**self.m, self.m,
                             self.provenance)
