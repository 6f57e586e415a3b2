import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from menger import BetaNumbers, CurvatureEnergy, TangentPlanes, shapes
from menger.grassmann import Subspace, grassmann_distance


def test_beta_numbers_transform_shape_and_values():
    circle = shapes.circle(20000)
    est = BetaNumbers(m=1, radii=(0.2, 0.1))
    B = est.fit(circle.points, sample_weight=circle.weights).transform(circle.points[:3])
    assert B.shape == (3, 2)
    assert np.all(B <= np.array([0.1, 0.05]) * (1 + 1e-9))
    assert len(est.records_) == 6
    theta = BetaNumbers(m=1, radii=(0.2,), field="theta").fit(circle.points)
    assert np.all(theta.transform(circle.points[:3]) >= B[:, :1])


def test_tangent_planes():
    circle = shapes.circle(4000)
    frames = TangentPlanes(m=1).fit(circle.points).transform([[1.0, 0.0], [0.0, -1.0]])
    assert frames.shape == (2, 2, 1)
    assert grassmann_distance(Subspace(frames[0]), Subspace.coordinate(2, [1])) < 1e-3
    assert grassmann_distance(Subspace(frames[1]), Subspace.coordinate(2, [0])) < 1e-3


def test_curvature_energy_estimator():
    circle = shapes.circle(60)
    est = CurvatureEnergy(m=1, l=3, p=4.0, mode="exhaustive", budget=10**6)
    est.fit(circle.points, sample_weight=circle.weights)
    assert est.value_ == est.estimate_.value > 0
    tp = CurvatureEnergy(m=1, p=2.0, kind="tp", mode="exhaustive", budget=10**6)
    assert tp.fit(circle.points, sample_weight=circle.weights).value_ > 0


def test_sklearn_conventions():
    est = BetaNumbers(m=2, radii=(0.3,))
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((1, 3)))
    with pytest.raises(NotFittedError):
        TangentPlanes().transform(np.zeros((1, 2)))
    est.fit(shapes.plane(500).points)
    assert est.n_features_in_ == 3
