import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from menger import shapes
from menger.cloud import WeightedCloud
from menger.curvature import (EnergyParams, SearchParams, energy, energy_tp, eta_d_check,
                              eta_d_lower_bound, exhaustive_cost, kappa, kappa_prime,
                              kappa_svdm, menger_c, required_diameter, sup_kappa,
                              sup_kappa_search, tangent_point_radius)
from menger.exceptions import BudgetError, DomainError
from menger.grassmann import Subspace

coords = st.floats(-10, 10, allow_nan=False)
pt3 = st.tuples(coords, coords, coords)


def test_menger_examples():
    assert menger_c([1, 0], [0, 1], [-1, 0]) == pytest.approx(1.0)
    assert menger_c([0, 0], [1, 1], [2, 2]) == 0.0
    assert menger_c([0, 0], [0, 0], [1, 0]) == 0.0
    s = 3.0
    eq = [[0, 0], [s, 0], [s / 2, s * math.sqrt(3) / 2]]
    assert menger_c(*eq) == pytest.approx(math.sqrt(3) / s)


def test_kappa_examples():
    eq = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    assert kappa(eq) == pytest.approx(math.sqrt(3) / 4)
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    assert kappa(tet) == pytest.approx((8 / 3) / math.sqrt(8) ** 4)
    assert kappa([[0, 0], [0, 0], [1, 0]]) == 0.0
    assert kappa_prime([[0, 0], [2, 0], [1, 1]]) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        kappa([[0, 0]])


def test_kappa_svdm_examples():
    tet = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    area = 1.5 + math.sqrt(3) / 2
    assert kappa_svdm(*tet) == pytest.approx((1 / 6) / (area * 2))
    assert kappa_svdm([0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]) == 0.0
    with pytest.raises(DomainError):
        kappa_svdm([0, 0], [1, 0], [0, 1], [1, 1])


@given(pt3, pt3, pt3)
def test_kappa_vs_menger(a, b, c):
    T = np.array([a, b, c])
    assert kappa(T) <= menger_c(a, b, c) / 4 * (1 + 1e-9) + 1e-12


@given(pt3, pt3, pt3, pt3)
def test_kappa_vs_svdm(a, b, c, d):
    T = np.array([a, b, c, d])
    assert kappa(T) <= 4 * math.pi * kappa_svdm(a, b, c, d) * (1 + 1e-9) + 1e-15


@given(st.integers(0, 2**31), st.floats(0.01, 100), st.integers(2, 4))
def test_curvatures_scale_and_move(seed, alpha, k):
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(k + 1, 4))
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    shift = rng.normal(size=4)
    moved = alpha * T @ Q.T + shift
    assert kappa(moved) == pytest.approx(kappa(T) / alpha, rel=1e-8, abs=1e-300)
    assert kappa_prime(moved) == pytest.approx(kappa_prime(T) / alpha, rel=1e-8, abs=1e-300)
    perm = rng.permutation(k + 1)
    assert kappa(T[perm]) == pytest.approx(kappa(T), rel=1e-10)
    if k == 2:
        assert menger_c(*moved[:, :]) == pytest.approx(menger_c(*T) / alpha, rel=1e-8)


def test_tangent_point_radius_examples():
    circle = shapes.circle(4000, radius=2.0)
    x = circle.points[0]
    y = circle.points[1000]
    assert tangent_point_radius(circle, x, y) == pytest.approx(2.0, rel=1e-3)
    line = WeightedCloud.uniform(np.stack([np.linspace(-1, 1, 101), np.zeros(101)], 1), 1)
    assert tangent_point_radius(line, line.points[50], line.points[80]) is None
    with pytest.raises(DomainError):
        tangent_point_radius(line, line.points[3], line.points[3])
    E1 = Subspace.coordinate(2, [0])
    assert tangent_point_radius(line, np.zeros(2), np.array([0.0, 1.0]), tangent=E1) == 0.5


def test_sup_kappa_edge_cases():
    cloud = shapes.circle(30)
    T = cloud.points[:3]
    assert sup_kappa(cloud, T) == kappa(T)
    with pytest.raises(DomainError):
        sup_kappa(cloud, cloud.points[:4])
    with pytest.raises(DomainError):
        sup_kappa(cloud, np.zeros((1, 3)))
    res = sup_kappa_search(cloud, cloud.points[:1])
    assert res.exhaustive


def test_sup_kappa_matches_exhaustive_on_small_cloud():
    cloud = shapes.circle(40)
    fixed = cloud.points[:1]
    exact = sup_kappa_search(cloud, fixed).value
    forced = sup_kappa_search(cloud, fixed, SearchParams(n_random=512, n_refine=8,
                                                         exhaustive_budget=0), seed=1)
    assert not forced.exhaustive
    assert forced.value <= exact + 1e-15
    assert forced.value == pytest.approx(exact, rel=1e-12)


def test_sup_kappa_monotone_in_draws():
    cloud = shapes.sphere(3000)
    fixed = cloud.points[:2]
    vals = [sup_kappa(cloud, fixed, SearchParams(n_random=k, exhaustive_budget=0), seed=5)
            for k in (8, 32, 128, 512)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_energy_params():
    p = EnergyParams(4.0, 3, 1)
    assert (p.lambda_, p.kappa, p.alpha) == (1.0, 14.0, 0.25)
    with pytest.raises(DomainError):
        EnergyParams(4.0, 4, 1)
    with pytest.raises(DomainError):
        EnergyParams(-1.0, 1, 1)
    assert exhaustive_cost(10, EnergyParams(4.0, 1, 1)) == 10 * 45


def test_energy_flat_disk_is_zero():
    disk = shapes.plane(300)
    est = energy(disk, EnergyParams(6.0, 4, 2), budget=2000, seed=0)
    assert est.value == 0.0
    line = WeightedCloud.uniform(np.stack([np.linspace(0, 1, 30)] * 2, 1), 1)
    assert energy(line, EnergyParams(4.0, 1, 1), mode="exhaustive", budget=10**6).value == 0.0


def test_energy_exhaustive_matches_oracle(oracles):
    circle = shapes.circle(60)
    est = energy(circle, EnergyParams(4.0, 3, 1), mode="exhaustive", budget=10**6)
    assert est.value == pytest.approx(oracles["circle60_l3_p4"], rel=1e-10)
    assert est.mode == "exhaustive" and est.std_error is None
    small = shapes.circle(40)
    est = energy(small, EnergyParams(4.0, 1, 1), mode="exhaustive", budget=10**6)
    assert est.value == pytest.approx(oracles["circle40_l1_p4"], rel=1e-10)


def test_energy_scaling_law():
    # E scales by alpha^(l m - p) when lengths scale by alpha
    circle = shapes.circle(40)
    params = EnergyParams(5.0, 2, 1)
    e1 = energy(circle, params, mode="exhaustive", budget=10**6).value
    big = WeightedCloud(circle.points * 3.0, circle.weights * 3.0, 1)
    e3 = energy(big, params, mode="exhaustive", budget=10**6).value
    assert e3 == pytest.approx(e1 * 3.0 ** (2 - 5), rel=1e-10)


def test_energy_deletion_monotone():
    rng = np.random.default_rng(7)
    cloud = WeightedCloud.uniform(rng.normal(size=(25, 2)), 1)
    params = EnergyParams(3.0, 2, 1)
    full = energy(cloud, params, mode="exhaustive", budget=10**6).value
    part = energy(cloud.subset(np.arange(20)), params, mode="exhaustive", budget=10**6).value
    assert part <= full


def test_energy_budget_refusal():
    cloud = shapes.circle(200)
    with pytest.raises(BudgetError) as err:
        energy(cloud, EnergyParams(4.0, 1, 1), mode="exhaustive", budget=1000)
    assert err.value.required == exhaustive_cost(200, EnergyParams(4.0, 1, 1))
    with pytest.raises(DomainError):
        energy(cloud, EnergyParams(4.0, 1, 2))
    with pytest.raises(DomainError):
        energy(cloud, EnergyParams(4.0, 1, 1), mode="quadrature")


def test_energy_monte_carlo_close_to_exhaustive(oracles):
    circle = shapes.circle(60)
    est = energy(circle, EnergyParams(4.0, 3, 1), budget=100_000, seed=3)
    assert est.value == pytest.approx(oracles["circle60_l3_p4"], abs=4 * est.std_error)


def test_energy_thread_invariance():
    cloud = shapes.sphere(400)
    params = EnergyParams(6.0, 2, 2)
    search = SearchParams(n_random=16, n_refine=1)
    a = energy(cloud, params, budget=3000, seed=11, search=search, threads=1)
    b = energy(cloud, params, budget=3000, seed=11, search=search, threads=4)
    assert a.value == b.value and a.std_error == b.std_error


def test_estimate_json():
    est = energy(shapes.circle(30), EnergyParams(4.0, 3, 1), budget=100, seed=2)
    d = json.loads(est.to_json())
    assert set(d) == {"value", "std_error", "mode", "n_outer_tuples", "inner", "seed", "params"}
    assert d["inner"] == {"n_random": 256, "n_refine_rounds": 4}
    assert d["params"]["lambda"] == 1.0


def test_energy_tp_circle_and_plane():
    circle = shapes.circle(800)
    est = energy_tp(circle, 2.0, mode="exhaustive", budget=10**6)
    assert est.value == pytest.approx((2 * math.pi) ** 2, rel=5e-3)
    mc = energy_tp(circle, 2.0, budget=20_000, seed=1)
    assert mc.value == pytest.approx(est.value, abs=5 * mc.std_error)
    disk = shapes.plane(400)
    assert energy_tp(disk, 4.0, mode="exhaustive", budget=10**6).value == 0.0
    with pytest.raises(BudgetError):
        energy_tp(circle, 2.0, mode="exhaustive", budget=100)


def test_eta_d_bound_and_required_diameter():
    params = EnergyParams(10.0, 4, 2)
    eta, A, E = 0.3, 1.2, 5.0
    d = required_diameter(eta, A, E, params)
    assert eta_d_lower_bound(eta, d, A, params) == pytest.approx(E, rel=1e-10)
    assert eta_d_lower_bound(eta, d / 2, A, params) > E


def test_eta_d_check_flat_and_errors():
    disk = shapes.plane(500)
    params = EnergyParams(10.0, 4, 2)
    assert eta_d_check(disk, 1.0, params, (1.0, 1.0), 5000) == []
    with pytest.raises(DomainError):
        eta_d_check(disk, 1.0, EnergyParams(8.0, 4, 2), (1.0, 1.0), 10)


def test_eta_d_check_flags_tiny_budget():
    sphere = shapes.sphere(500)
    params = EnergyParams(10.0, 4, 2)
    v = eta_d_check(sphere, 1e-300, params, (1.0, 2.0), 2000, seed=1)
    assert v and all(0 < rec["eta"] < 1 and rec["forced_energy"] > 1e-300 for rec in v)
