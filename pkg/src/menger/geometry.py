"""Euclidean geometry of simplices: volumes, diameters, faces and heights.

A simplex of order ``k`` is an ordered tuple of ``k + 1`` vertices in R^n,
stored as a ``(k + 1, n)`` array. Degenerate simplices (coincident or
affinely dependent vertices) are legal everywhere and have volume zero.

Volumes are computed from the QR factorization of the edge matrix, which
is the square root of the Gram determinant without forming ``G G^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_ratio
from .exceptions import DomainError

#: Gram determinants below this fraction of the product of squared edge
#: norms are treated as exactly zero.
GRAM_CLAMP = 1e-14

#: Relative singular-value cutoff used to decide affine rank.
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Simplex:
    """Ordered vertex tuple ``(x_0, ..., x_k)``.

    ``indices`` optionally records where the vertices came from in a
    point cloud.
    """

    vertices: np.ndarray
    indices: tuple | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64, ndmin=2)
        if v.ndim != 2 or v.shape[0] < 1:
            raise DomainError(f"simplex needs a (k+1, n) vertex array, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("simplex vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def k(self):
        return self.vertices.shape[0] - 1

    @property
    def n(self):
        return self.vertices.shape[1]

    def volume(self):
        return simplex_volume(self)

    def diameter(self):
        return simplex_diameter(self)

    def face(self, i):
        return face(self, i)

    def height(self, i):
        return height(self, i)

    def min_height(self):
        return min_height(self)

    @property
    def degenerate(self):
        return simplex_volume(self) == 0.0

    def __len__(self):
        return self.vertices.shape[0]

    def __repr__(self):
        return f"Simplex(k={self.k}, n={self.n}, indices={self.indices})"


@dataclass(frozen=True)
class VoluminousParams:
    eta: float
    d: float

    def __post_init__(self):
        check_ratio(self.eta, "eta")
        check_positive(self.d, "d")


def _vertices(s):
    if isinstance(s, Simplex):
        return s.vertices
    v = np.asarray(s, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim != 2:
        raise DomainError(f"expected a (k+1, n) vertex array, got shape {v.shape}")
    return v


def simplex_volume(s):
    """k-dimensional Hausdorff measure of the convex hull of the vertices.

    A single vertex has (counting) measure 1. Simplices with more than
    ``n + 1`` vertices are always degenerate and return 0.
    """
    v = _vertices(s)
    k = v.shape[0] - 1
    if k == 0:
        return 1.0
    if k > v.shape[1]:
        return 0.0
    edges = v[1:] - v[0]
    sq_norms = np.einsum("ij,ij->i", edges, edges)
    bound = np.prod(sq_norms)
    if bound == 0.0:
        return 0.0
    r = np.linalg.qr(edges.T, mode="r")
    gram_det = np.prod(np.diag(r) ** 2)
    if gram_det <= GRAM_CLAMP * bound:
        return 0.0
    return float(math.sqrt(gram_det) / math.factorial(k))


def simplex_volumes(batch):
    """Vectorized :func:`simplex_volume` over a ``(B, k + 1, n)`` array."""
    batch = np.asarray(batch, dtype=np.float64)
    B, kp1, n = batch.shape
    k = kp1 - 1
    if k == 0:
        return np.ones(B)
    if k > n:
        return np.zeros(B)
    edges = batch[:, 1:, :] - batch[:, :1, :]
    sq_norms = np.einsum("bij,bij->bi", edges, edges)
    bound = np.prod(sq_norms, axis=1)
    r = np.linalg.qr(np.swapaxes(edges, 1, 2), mode="r")
    diag = np.diagonal(r, axis1=1, axis2=2)
    gram_det = np.prod(diag**2, axis=1)
    vol = np.sqrt(gram_det) / math.factorial(k)
    vol[(gram_det <= GRAM_CLAMP * bound) | (bound == 0.0)] = 0.0
    return vol


def simplex_diameter(s):
    """Largest pairwise distance between vertices."""
    v = _vertices(s)
    if v.shape[0] < 2:
        raise DomainError("diameter needs at least 2 vertices")
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


def simplex_diameters(batch):
    batch = np.asarray(batch, dtype=np.float64)
    diff = batch[:, :, None, :] - batch[:, None, :, :]
    sq = np.einsum("bijk,bijk->bij", diff, diff)
    return np.sqrt(sq.reshape(batch.shape[0], -1).max(axis=1))


def face(s, i):
    """The i-th face: the simplex with vertex ``i`` removed."""
    v = _vertices(s)
    k = v.shape[0] - 1
    if not 0 <= i <= k:
        raise DomainError(f"face index {i} out of range 0..{k}")
    idx = None
    if isinstance(s, Simplex) and s.indices is not None:
        idx = tuple(j for pos, j in enumerate(s.indices) if pos != i)
    return Simplex(np.delete(v, i, axis=0), indices=idx)


def _affine_frame(points):
    """Base point and orthonormal frame of the affine hull, at its true rank."""
    base = points[0]
    edges = points[1:] - base
    n = points.shape[1]
    if edges.shape[0] == 0:
        return base, np.zeros((n, 0))
    u, sv, _ = np.linalg.svd(edges.T, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return base, np.zeros((n, 0))
    rank = int(np.sum(sv > RANK_TOL * sv[0]))
    return base, u[:, :rank]


def dist_to_affine(p, base, frame):
    """Distance from ``p`` to the affine subspace ``base + span(frame)``.

    ``frame`` is an (n, m) matrix with orthonormal columns, or any object
    exposing such a matrix as ``.frame``.
    """
    F = np.asarray(getattr(frame, "frame", frame), dtype=np.float64)
    w = np.asarray(p, dtype=np.float64) - np.asarray(base, dtype=np.float64)
    if F.size:
        w = w - F @ (F.T @ w)
    return float(np.linalg.norm(w))


def height(s, i):
    """Distance from vertex ``i`` to the affine hull of the other vertices."""
    v = _vertices(s)
    k = v.shape[0] - 1
    if k < 1:
        raise DomainError("height needs at least 2 vertices")
    if not 0 <= i <= k:
        raise DomainError(f"vertex index {i} out of range 0..{k}")
    rest = np.delete(v, i, axis=0)
    base, F = _affine_frame(rest)
    return dist_to_affine(v[i], base, F)


def min_height(s):
    v = _vertices(s)
    return min(height(v, i) for i in range(v.shape[0]))


def min_heights(batch):
    """Vectorized minimal heights for nondegenerate-or-zero simplices.

    Uses ``h_i = k V / V(fc_i)``: the minimal height belongs to the
    largest face. Degenerate simplices get 0.
    """
    batch = np.asarray(batch, dtype=np.float64)
    k = batch.shape[1] - 1
    vol = simplex_volumes(batch)
    faces = np.stack([simplex_volumes(np.delete(batch, i, axis=1))
                      for i in range(k + 1)], axis=1)
    largest = faces.max(axis=1)
    out = np.zeros(batch.shape[0])
    ok = (vol > 0) & (largest > 0)
    out[ok] = k * vol[ok] / largest[ok]
    return out


def is_voluminous(s, params=None, *, eta=None, d=None):
    """True iff ``diam(s) <= d`` and ``h_min(s) >= eta * d``."""
    if params is None:
        params = VoluminousParams(eta, d)
    return bool(simplex_diameter(s) <= params.d
                and min_height(s) >= params.eta * params.d)


def varsigma(k, eta):
    """Relative vertex displacement that keeps a voluminous simplex's volume
    within a factor [3/4, 5/4]: ``(1 + eta^k / (4 k!))^(1/k) - 1``."""
    if int(k) != k or k < 1:
        raise DomainError(f"order k must be a positive integer, got {k}")
    eta = check_ratio(eta, "eta")
    k = int(k)
    return math.expm1(math.log1p(eta**k / (4.0 * math.factorial(k))) / k)


def wedge(vectors):
    """Outer product ``w_1 ^ ... ^ w_l`` as its vector of l-minors."""
    W = np.asarray(vectors, dtype=np.float64)
    l, n = W.shape
    from itertools import combinations
    return np.array([np.linalg.det(W[:, list(c)]) for c in combinations(range(n), l)])


def unit_ball_volume(m):
    """Lebesgue measure of the unit ball in R^m (``omega_m``)."""
    if m < 0:
        raise DomainError(f"dimension must be nonnegative, got {m}")
    table = {0: 1.0, 1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}
    if m in table:
        return table[m]
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)
