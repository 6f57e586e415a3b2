import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from menger import constants
from menger.exceptions import DomainError, PreconditionError, RankDeficiencyError, SamplingError
from menger.grassmann import (Cone, Subspace, angle_perturbation_bound, basis_defect,
                              cone_contains, cone_inclusion_check, grassmann_distance,
                              is_rho_eps_basis, orthonormalize_tracked, perp_norms, project,
                              project_perp)


def line(phi):
    return Subspace(np.array([[math.cos(phi)], [math.sin(phi)]]))


def random_subspace(rng, n, m):
    Q, _ = np.linalg.qr(rng.normal(size=(n, m)))
    return Subspace(Q)


def test_project_examples():
    e1 = Subspace.coordinate(2, [0])
    assert np.allclose(project(e1, [3, 4]), [3, 0])
    assert np.allclose(project_perp(e1, [3, 4]), [0, 4])
    assert np.allclose(e1.project([2.0, 0.0]), [2.0, 0.0])
    with pytest.raises(DomainError):
        project(e1, [1, 2, 3])


def test_pythagoras_and_orthogonality():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        S = random_subspace(rng, n, int(rng.integers(1, n + 1)))
        v = rng.normal(size=n)
        a, b = project(S, v), project_perp(S, v)
        assert np.allclose(a + b, v, atol=1e-12)
        assert abs(a @ b) <= 1e-12 * (1 + v @ v)
        assert v @ v == pytest.approx(a @ a + b @ b, rel=1e-12)
        assert np.allclose(project_perp(S, project(S, v)), 0, atol=1e-12)


def test_subspace_rejects_bad_frames():
    with pytest.raises(DomainError):
        Subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        Subspace(np.ones((2, 3)))
    assert Subspace.from_basis([[2.0, 0, 0], [1.0, 1.0, 0]]).dim == 2


def test_distance_examples():
    a = line(0.3)
    assert grassmann_distance(a, a) == pytest.approx(0, abs=1e-15)
    assert grassmann_distance(line(0), line(math.pi / 2)) == pytest.approx(1.0)
    for phi in np.linspace(-3, 3, 25):
        assert grassmann_distance(line(0.0), line(phi)) == pytest.approx(abs(math.sin(phi)),
                                                                       abs=1e-12)
    with pytest.raises(DomainError):
        grassmann_distance(line(0), Subspace.coordinate(3, [0]))


def test_metric_axioms_and_perp_form():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, n))
        U, V, W = (random_subspace(rng, n, m) for _ in range(3))
        uv = grassmann_distance(U, V)
        assert uv == pytest.approx(grassmann_distance(V, U), abs=1e-12)
        assert uv <= grassmann_distance(U, W) + grassmann_distance(W, V) + 1e-10
        assert grassmann_distance(U, U) <= 1e-12
        assert uv <= 1 + 1e-12
        perp = np.eye(n) - U.projector
        perp_v = np.eye(n) - V.projector
        assert uv == pytest.approx(np.linalg.norm(perp_v - perp, 2), abs=1e-12)


def test_orthonormalize_examples():
    S, dev = orthonormalize_tracked(np.eye(3)[:2])
    assert dev == 0.0
    assert np.allclose(S.frame, np.eye(3)[:, :2])
    eps = 1e-3
    S, dev = orthonormalize_tracked([[1.0, 0.0], [eps, 1.0]])
    assert dev == pytest.approx(eps, rel=1e-12)
    assert np.allclose(np.abs(S.frame), np.eye(2))


def test_orthonormalize_rank_deficiency_reports_index():
    with pytest.raises(RankDeficiencyError) as err:
        orthonormalize_tracked([[1, 0, 0], [0, 1, 0], [1, 1, 0]])
    assert err.value.index == 2
    with pytest.raises(RankDeficiencyError) as err:
        orthonormalize_tracked([[0, 0, 0], [1, 0, 0]])
    assert err.value.index == 0
    with pytest.raises(RankDeficiencyError):
        orthonormalize_tracked(np.ones((4, 3)))


def perturbed_basis(rng, n, m, rho, size):
    Q, _ = np.linalg.qr(rng.normal(size=(n, m)))
    return rho * (Q.T + rng.normal(size=(m, n)) * size)


def test_deviation_sweep_within_10_m_eps():
    rng = np.random.default_rng(2)
    for _ in range(2000):
        m = int(rng.integers(1, 5))
        n = m + int(rng.integers(0, 4))
        V = perturbed_basis(rng, n, m, 1.0, 0.01 * rng.random() / (3 * math.sqrt(n)))
        eps = basis_defect(V, 1.0)
        if eps == 0 or eps > 0.01:
            continue
        _, dev = orthonormalize_tracked(V)
        assert dev <= 10 * m * eps
        assert dev <= constants.gram_schmidt_constant(m) * eps


def test_constants_frozen():
    assert constants.gram_schmidt_constant(1) == 1.0
    assert constants.gram_schmidt_constant(2) == pytest.approx(3 + 2 * math.sqrt(2))
    assert constants.projection_constant(1) == 4.0
    for m in range(1, 5):
        assert constants.EMPIRICAL_GS_RATIO[m] < constants.gram_schmidt_constant(m)
        c_pi, c_gs = constants.projection_constant(m), constants.gram_schmidt_constant(m)
        assert 1 - c_pi * c_gs * constants.eps_reduction(m) == pytest.approx(0.5)


def test_rho_eps_basis():
    assert is_rho_eps_basis(np.eye(3), 1.0, 1e-9)
    assert not is_rho_eps_basis([[1, 0], [1, 0]], 1.0, 0.5)
    Q, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(4, 3)))
    assert is_rho_eps_basis(2.5 * Q.T, 2.5, 1e-12)
    assert not is_rho_eps_basis(2.5 * Q.T, 1.0, 0.5)


def test_angle_bound_examples():
    B = np.eye(3)[:2]
    assert angle_perturbation_bound(B, B, 1.0, 0.0) == 0.0
    c, s = math.cos(0.01), math.sin(0.01)
    R = np.array([[c, 0, -s], [0, 1, 0], [s, 0, c]])
    U = B @ R.T
    theta = float(np.max(np.linalg.norm(U - B, axis=1)))
    d = grassmann_distance(Subspace(B.T), Subspace(U.T))
    assert d == pytest.approx(math.sin(0.01), rel=1e-9)
    assert angle_perturbation_bound(B, U, 1.0, theta) >= d


def test_angle_bound_sweep():
    rng = np.random.default_rng(4)
    done = 0
    while done < 500:
        m = int(rng.integers(1, 4))
        n = m + int(rng.integers(1, 4))
        rho = float(rng.uniform(0.2, 5))
        eps_red = constants.eps_reduction(m)
        V = perturbed_basis(rng, n, m, rho, eps_red / (4 * math.sqrt(n)))
        if basis_defect(V, rho) > eps_red:
            continue
        U = V + rng.normal(size=V.shape) * rho * rng.uniform(1e-4, 0.1)
        theta = float(np.max(np.linalg.norm(U - V, axis=1))) / rho
        bound = angle_perturbation_bound(V, U, rho, theta)
        actual = grassmann_distance(Subspace.from_basis(V), Subspace.from_basis(U))
        assert bound >= actual
        done += 1


def test_angle_bound_preconditions():
    with pytest.raises(PreconditionError):
        angle_perturbation_bound([[1, 0], [0.5, 1]], [[1, 0], [0.5, 1]], 1.0, 0.1)
    with pytest.raises(PreconditionError):
        angle_perturbation_bound(np.eye(2), np.eye(2) * 2, 1.0, 0.1)


def test_proj_ang_surrogate():
    rng = np.random.default_rng(5)
    for _ in range(300):
        m = int(rng.integers(1, 4))
        n = m + int(rng.integers(1, 4))
        U = random_subspace(rng, n, m)
        V = Subspace.from_basis(U.frame.T + rng.normal(size=(m, n)) * 0.05)
        theta = float(perp_norms(U, V.frame.T).max())
        c = 2 * m * (1 + constants.gram_schmidt_constant(m))
        assert grassmann_distance(U, V) <= c * theta + 1e-12


def test_cone_examples():
    H = Subspace.coordinate(2, [0])
    c = Cone(0.5, H)
    assert cone_contains(c, [0, 1])
    assert not cone_contains(c, [1, 0.1])
    assert cone_contains(c, [0, 0])
    cap = Cone(0.5, H, radii=(1, 2))
    assert cone_contains(cap, [0, 1.5])
    assert not cone_contains(cap, [0, 0.5])
    assert not cone_contains(cap, [0, 0])
    assert not cone_contains(cap, [0, 1.0])
    with pytest.raises(DomainError):
        Cone(1.0, H)
    with pytest.raises(DomainError):
        Cone(0.5, H, radii=(2, 1))


def test_cone_inclusion_same_axis():
    H = Subspace.coordinate(3, [0])
    ok, witness = cone_inclusion_check(0.1, 0.1, H, H, 0.05, 20_000, seed=0)
    assert ok and witness is None


def test_cone_inclusion_precondition():
    H = Subspace.coordinate(2, [0])
    with pytest.raises(PreconditionError):
        cone_inclusion_check(0.6, 0.5, H, H, 0.1, 100, seed=0)
    with pytest.raises(PreconditionError):
        cone_inclusion_check(0.01, 0.01, H, Subspace.coordinate(2, [1]), 0.1, 100, seed=0)


def test_cone_inclusion_small_rotation_lines():
    for n, seed in ((2, 1), (3, 2), (4, 3)):
        H0 = Subspace.coordinate(n, [0])
        v = np.zeros(n)
        v[0], v[1] = math.cos(0.05), math.sin(0.05)
        H1 = Subspace(v[:, None])
        ok, witness = cone_inclusion_check(0.1, 0.1, H0, H1, 0.05, 100_000, seed=seed)
        assert ok, witness


def test_cone_inclusion_fails_for_planes_with_witness():
    # planes sharing a line: x = e3 lies in the left cone but inside H1
    H0 = Subspace.coordinate(4, [0, 1])
    H1 = Subspace.coordinate(4, [0, 2])
    ok, witness = cone_inclusion_check(0.1, 0.1, H0, H1, 0.3, 100_000, seed=0)
    assert not ok
    w = witness / np.linalg.norm(witness)
    assert np.linalg.norm(project_perp(H0, w)) >= 0.1 / math.sqrt(0.99) + 0.3 - 1e-12
    assert np.linalg.norm(project_perp(H1, w)) < 0.3


def test_cone_inclusion_sampling_error():
    H = Subspace.coordinate(3, [0])
    with pytest.raises(SamplingError):
        cone_inclusion_check(0.1, 0.1, H, H, 0.75, 1000, seed=0, max_attempts=10)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_line_distance_is_sine_of_difference(a, b):
    assert grassmann_distance(line(a), line(b)) == pytest.approx(abs(math.sin(a - b)), abs=1e-12)
