"""Linear subspaces of R^n, their projections and the operator-norm metric.

A :class:`Subspace` always stores an orthonormal frame; raw (possibly
skewed) bases are accepted only as inputs to :meth:`Subspace.from_basis`
and :func:`orthonormalize_tracked`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import constants
from ._validation import check_vector
from .exceptions import DomainError, PreconditionError, RankDeficiencyError, SamplingError

ORTHO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Subspace:
    """m-dimensional linear subspace of R^n given by an (n, m) orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        F = np.array(self.frame, dtype=np.float64)
        if F.ndim == 1:
            F = F[:, None]
        if F.ndim != 2 or not (1 <= F.shape[1] <= F.shape[0]):
            raise DomainError(f"frame must be (n, m) with 1 <= m <= n, got {F.shape}")
        if not np.all(np.isfinite(F)):
            raise DomainError("frame has non-finite entries")
        if np.max(np.abs(F.T @ F - np.eye(F.shape[1]))) > 1e-10:
            raise DomainError("frame columns are not orthonormal; use Subspace.from_basis")
        F.setflags(write=False)
        object.__setattr__(self, "frame", F)

    @classmethod
    def from_basis(cls, vectors):
        """Span of the given row vectors, re-orthonormalized."""
        frame, _ = orthonormalize_tracked(vectors)
        return frame

    @classmethod
    def coordinate(cls, n, axes):
        """Span of the standard basis vectors ``e_i`` for ``i`` in ``axes``."""
        F = np.zeros((n, len(axes)))
        for col, ax in enumerate(axes):
            F[ax, col] = 1.0
        return cls(F)

    @property
    def ambient_dim(self):
        return self.frame.shape[0]

    @property
    def dim(self):
        return self.frame.shape[1]

    @cached_property
    def projector(self):
        return self.frame @ self.frame.T

    @cached_property
    def complement(self):
        """Orthonormal frame of the orthogonal complement (may be empty)."""
        n, m = self.frame.shape
        u, _, _ = np.linalg.svd(self.frame, full_matrices=True)
        return u[:, m:]

    def project(self, v):
        return project(self, v)

    def project_perp(self, v):
        return project_perp(self, v)

    def __repr__(self):
        return f"Subspace(n={self.ambient_dim}, m={self.dim})"


def _check_dim(sub, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != sub.ambient_dim:
        raise DomainError(
            f"vector dimension {v.shape[-1]} does not match ambient dimension {sub.ambient_dim}")
    return v


def project(sub, v):
    """Orthogonal projection onto ``sub``; works on a vector or rows of a matrix."""
    v = _check_dim(sub, v)
    return (v @ sub.frame) @ sub.frame.T


def project_perp(sub, v):
    v = _check_dim(sub, v)
    return v - project(sub, v)


def perp_norms(sub, V):
    """Row-wise ``|pi_perp(v)|`` for an (N, n) array."""
    V = _check_dim(sub, np.atleast_2d(V))
    coef = V @ sub.frame
    sq = np.einsum("ij,ij->i", V, V) - np.einsum("ij,ij->i", coef, coef)
    return np.sqrt(np.maximum(sq, 0.0))


def grassmann_distance(U, V):
    """Operator norm ``||pi_U - pi_V||`` (largest singular value)."""
    if U.ambient_dim != V.ambient_dim:
        raise DomainError(
            f"ambient dimensions differ: {U.ambient_dim} vs {V.ambient_dim}")
    return float(np.linalg.norm(U.projector - V.projector, ord=2))


def orthonormalize_tracked(vectors):
    """Classical Gram-Schmidt that reports how far it moved the input.

    Returns the spanned :class:`Subspace` and ``max_i |v_i - vhat_i|``.
    Raises :class:`RankDeficiencyError` naming the first dependent vector.
    """
    V = np.array(vectors, dtype=np.float64, ndmin=2)
    if V.ndim != 2 or V.shape[0] < 1:
        raise DomainError(f"expected (m, n) row vectors, got shape {V.shape}")
    m, n = V.shape
    if m > n:
        raise RankDeficiencyError(f"{m} vectors in R^{n} are dependent", index=n)
    if not np.all(np.isfinite(V)):
        raise DomainError("vectors must be finite")
    hat = np.zeros_like(V)
    for i in range(m):
        vi = V[i]
        s = hat[:i].T @ (hat[:i] @ vi) if i else np.zeros(n)
        t = vi - s
        norm_t = np.linalg.norm(t)
        if norm_t <= ORTHO_TOL * max(np.linalg.norm(vi), 1e-300) or norm_t == 0.0:
            raise RankDeficiencyError(
                f"vector {i} lies in the span of vectors 0..{i - 1}", index=i)
        hat[i] = t / norm_t
    deviation = float(np.max(np.linalg.norm(V - hat, axis=1)))
    frame = hat.T
    # re-orthogonalize once for floating-point hygiene; deviation is unaffected
    q, r = np.linalg.qr(frame)
    q = q * np.sign(np.diag(r))
    return Subspace(q), deviation


def basis_defect(vectors, rho):
    """Smallest eps for which ``vectors`` is a rho-eps basis."""
    V = np.array(vectors, dtype=np.float64, ndmin=2)
    G = np.abs(V @ V.T) / rho**2
    return float(np.max(np.abs(G - np.eye(V.shape[0]))))


def is_rho_eps_basis(vectors, rho, eps):
    """Check ``(delta_ij - eps) rho^2 <= |<v_i, v_j>| <= (delta_ij + eps) rho^2``."""
    V = np.array(vectors, dtype=np.float64, ndmin=2)
    G = np.abs(V @ V.T)
    I = np.eye(V.shape[0])
    r2 = rho**2
    return bool(np.all(G >= (I - eps) * r2) and np.all(G <= (I + eps) * r2))


def angle_perturbation_bound(basis, perturbed, rho, theta):
    """Certified bound on ``d_Gr(span basis, span perturbed)``.

    ``basis`` must be a rho-eps basis with ``eps <= eps_red(m)`` and every
    ``|u_i - v_i| <= theta * rho``. Returns
    ``C_pi / (1 - C_pi * C_gs * eps) * theta``.
    """
    V = np.array(basis, dtype=np.float64, ndmin=2)
    U = np.array(perturbed, dtype=np.float64, ndmin=2)
    if V.shape != U.shape:
        raise DomainError(f"basis shapes differ: {V.shape} vs {U.shape}")
    if rho <= 0 or theta < 0:
        raise DomainError("rho must be positive and theta nonnegative")
    m = V.shape[0]
    eps = basis_defect(V, rho)
    eps_red = constants.eps_reduction(m)
    if eps > eps_red:
        raise PreconditionError(
            f"basis defect eps={eps:.3g} exceeds eps_red({m})={eps_red:.3g}")
    moved = float(np.max(np.linalg.norm(U - V, axis=1)))
    if moved > theta * rho * (1 + 1e-12):
        raise PreconditionError(
            f"max |u_i - v_i| = {moved:.3g} exceeds theta*rho = {theta * rho:.3g}")
    c_pi = constants.projection_constant(m)
    c_gs = constants.gram_schmidt_constant(m)
    return c_pi / (1.0 - c_pi * c_gs * eps) * theta


@dataclass(frozen=True, eq=False)
class Cone:
    """``{x : |pi_perp_H(x)| >= delta |x|}``, optionally cut by the open shell
    ``r < |x| < R``."""

    delta: float
    axis_complement: Subspace
    radii: tuple | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.radii is not None:
            r, R = self.radii
            if not 0 <= r < R:
                raise DomainError(f"need 0 <= r < R, got {self.radii}")


def cone_contains(cone, x):
    x = check_vector(x, cone.axis_complement.ambient_dim)
    norm = float(np.linalg.norm(x))
    inside = float(np.linalg.norm(project_perp(cone.axis_complement, x))) >= cone.delta * norm
    if cone.radii is not None:
        r, R = cone.radii
        inside = inside and r < norm < R
    return bool(inside)


def _cones_meet(alpha, beta, H0, H1):
    """Is there a unit y with dist(y, H0) <= alpha and dist(y, H1) <= beta?

    Happens iff the smallest principal angle between H0 and H1 is at most
    ``arcsin(alpha) + arcsin(beta)``.
    """
    s = np.linalg.svd(H0.frame.T @ H1.frame, compute_uv=False)
    phi = math.acos(min(1.0, float(s[0])))
    return phi <= math.asin(min(alpha, 1.0)) + math.asin(min(beta, 1.0)) + 1e-15


def cone_inclusion_check(alpha, beta, H0, H1, eps, n_samples, seed, *, max_attempts=None):
    """Randomized refutation of ``C(gamma + eps, H0) in C(eps, H1)`` with
    ``gamma = (alpha + beta) / sqrt(1 - beta^2)``.

    Returns ``(True, None)`` if no sampled unit vector of the left cone
    escapes the right cone, else ``(False, witness)``. Never a proof.
    Half the samples are uniform on the sphere (rejection), half are
    placed on the boundary of the left cone where violations concentrate.
    """
    if H0.ambient_dim != H1.ambient_dim or H0.dim != H1.dim:
        raise DomainError("H0 and H1 must have equal ambient dimension and dimension")
    if not (alpha > 0 and beta > 0 and alpha + beta < math.sqrt(max(0.0, 1 - beta**2))):
        raise PreconditionError(
            f"need alpha, beta > 0 and alpha + beta < sqrt(1 - beta^2); got {alpha}, {beta}")
    if not _cones_meet(alpha, beta, H0, H1):
        raise PreconditionError("the dual cones around H0 and H1 do not intersect")
    gamma = (alpha + beta) / math.sqrt(1 - beta**2) + eps
    if gamma > 1.0:
        return True, None
    rng = np.random.default_rng(seed)
    n = H0.ambient_dim
    comp = H0.complement
    if max_attempts is None:
        max_attempts = 1000 * n_samples

    def violates(X):
        ok = perp_norms(H1, X) >= eps * np.linalg.norm(X, axis=1) * (1 - 1e-12)
        return np.flatnonzero(~ok)

    n_uniform = n_samples // 2
    accepted, attempts = 0, 0
    while accepted < n_uniform:
        if attempts >= max_attempts:
            raise SamplingError(
                f"rejection sampling accepted {accepted}/{n_uniform} after {attempts} draws")
        batch = min(max(4 * (n_uniform - accepted), 256), 200_000, max_attempts - attempts)
        X = rng.normal(size=(batch, n))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        attempts += batch
        X = X[perp_norms(H0, X) >= gamma][: n_uniform - accepted]
        accepted += X.shape[0]
        bad = violates(X)
        if bad.size:
            return False, X[bad[0]]

    n_edge = n_samples - n_uniform
    if comp.shape[1] == 0 or n_edge == 0:
        return True, None
    a = rng.normal(size=(n_edge, H0.dim))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = rng.normal(size=(n_edge, comp.shape[1]))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    t = gamma + (1 - gamma) * rng.random(n_edge) ** 4
    X = (a @ H0.frame.T) * np.sqrt(1 - t**2)[:, None] + (b @ comp.T) * t[:, None]
    X = X[perp_norms(H0, X) >= gamma * (1 - 1e-12)]
    bad = violates(X)
    if bad.size:
        return False, X[bad[0]]
    return True, None
