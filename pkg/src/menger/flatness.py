"""Multiscale flatness of a weighted point cloud.

For a center ``x`` and radius ``r`` the beta number is the smallest
half-width, relative to ``r``, of a slab around an affine m-plane through
``x`` containing every sample in the closed ball. The theta number adds
the worst distance from the plane disk back to the samples, so it also
sees holes. Hausdorff distances use the *sum* of the two directed
suprema, not their maximum.

Plane optimizers
----------------
* codimension 1: exact. The minimal slab half-width through ``x`` equals
  the distance from the origin to the nearest facet of the convex hull of
  ``{+-(z - x)}``.
* higher codimension: multistart Lawson reweighting (weighted PCA whose
  weights are pushed towards the worst points) followed by a Nelder-Mead
  polish in a local chart of the Grassmannian. Five starts: uniform
  weights, three seeded random weightings and the max-volume-simplex face.
* theta: the beta plane, the PCA plane, the simplex face plane (and, for
  lines in the plane, a 180-angle scan) are polished with Nelder-Mead on
  the theta objective. Ties go to the lowest candidate index.

The plane-side supremum of theta is evaluated on a fixed grid of the
m-disk: 257 points along the diameter for m = 1, a square lattice of
pitch r/24 plus 96 rim points for m = 2, pitch r/6 for m >= 3. The grid
underestimates that supremum by at most half the lattice diagonal.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import ConvexHull, QhullError, cKDTree

from ._validation import check_positive, check_vector
from .cloud import WeightedCloud
from .exceptions import DomainError
from .geometry import Simplex, simplex_volume, simplex_volumes, unit_ball_volume
from .grassmann import Subspace, grassmann_distance, perp_norms

RANK_TOL = 1e-12
_OPT_SEED = 20240601


@dataclass(frozen=True, eq=False)
class ScaleRecord:
    center: np.ndarray
    radius: float
    beta: float
    theta: float
    best_plane: Subspace
    ahlfors_ratio: float
    covering_radius: float = float("nan")
    tie_index: int = 0


@dataclass(frozen=True, eq=False)
class OscillationRecord:
    center: np.ndarray
    other: np.ndarray
    radius: float
    oscillation: float


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through ``(log r, log value)``."""

    exponent: float
    intercept: float
    r_range: tuple
    residual: float
    n_records: int


@dataclass(frozen=True, eq=False)
class TangentEstimate:
    plane: Subspace
    radius: float
    radii: tuple
    planes: tuple = field(repr=False)
    increments: tuple = ()


def hausdorff_defect(E, F):
    """``sup_{y in E} dist(y, F) + sup_{y in F} dist(y, E)`` for finite sets."""
    E = np.atleast_2d(np.asarray(E, dtype=np.float64))
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if E.size == 0 or F.size == 0:
        raise DomainError("Hausdorff defect needs two nonempty sets")
    if E.shape[1] != F.shape[1]:
        raise DomainError("point sets live in different dimensions")
    d_ef, _ = cKDTree(F).query(E)
    d_fe, _ = cKDTree(E).query(F)
    return float(d_ef.max() + d_fe.max())


def _ball_offsets(cloud, x, r):
    x = check_vector(x, cloud.n)
    r = check_positive(r, "r")
    idx = cloud.ball(x, r)
    if idx.size == 0:
        raise DomainError(f"closed ball of radius {r} around x contains no samples")
    return x, r, idx, cloud.points[idx] - x


def _max_perp(Z, Q):
    return float(perp_norms_raw(Z, Q).max())


def _orth(M):
    q, r = np.linalg.qr(M)
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def _complement(Q):
    u, _, _ = np.linalg.svd(Q, full_matrices=True)
    return u[:, Q.shape[1]:]


def _low_rank_plane(Z, m):
    """Top-m right singular vectors and the numerical rank of Z."""
    n = Z.shape[1]
    if not np.any(Z):
        return np.eye(n)[:, :m], 0
    if Z.shape[0] < n:
        Z = np.vstack([Z, np.zeros((n - Z.shape[0], n))])
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0]))
    return vt[:m].T.copy(), rank


def _pca_plane(Z, m, w=None):
    M = Z.T @ (Z if w is None else Z * w[:, None])
    vals, vecs = np.linalg.eigh(M)
    return vecs[:, ::-1][:, :m].copy()


def _hull_beta(Z):
    """Exact minimal half-width for hyperplanes through the origin.

    The hull is built in whitened coordinates (hull combinatorics are
    linear-invariant), so nearly flat inputs stay well conditioned.
    """
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    if s.size < Z.shape[1] or s[-1] <= RANK_TOL * s[0]:
        return None
    W = (Z @ vt.T) / s
    try:
        hull = ConvexHull(np.vstack([W, -W]))
    except (QhullError, ValueError):
        return None
    normals = (hull.equations[:, :-1] / s) @ vt
    lengths = np.linalg.norm(normals, axis=1)
    normals /= lengths[:, None]
    # facet distance to the origin, mapped back to the original coordinates
    dist = -hull.equations[:, -1] / lengths
    best = np.argsort(dist, kind="stable")[:8]
    widths = np.max(np.abs(Z @ normals[best].T), axis=0)
    j = int(np.argmin(widths))
    return float(widths[j]), normals[best[j]]


def _lawson(Z, m, w, iters=150):
    best_Q, best_val = None, np.inf
    w = w / w.sum()
    for _ in range(iters):
        Q = _pca_plane(Z, m, w)
        d = perp_norms_raw(Z, Q)
        val = d.max()
        if val < best_val - 1e-15:
            best_Q, best_val = Q, val
        wd = w * d
        s = wd.sum()
        if s <= 0:
            break
        w = wd / s
    return best_Q


def perp_norms_raw(Z, Q):
    # explicit residual; differencing squared norms loses half the digits near 0
    R = Z - (Z @ Q) @ Q.T
    return np.sqrt(np.einsum("ij,ij->i", R, R))


def _polish(objective, Q0, maxiter=600):
    n, m = Q0.shape
    C = _complement(Q0)
    if C.shape[1] == 0:
        return Q0, objective(Q0)

    def chart(a):
        return _orth(Q0 + C @ a.reshape(C.shape[1], m))

    f0 = objective(Q0)
    res = minimize(lambda a: objective(chart(a)), np.zeros(C.shape[1] * m),
                   method="Nelder-Mead",
                   options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": maxiter,
                            "initial_simplex": _initial_simplex(C.shape[1] * m, 0.05)})
    if res.fun < f0:
        return chart(res.x), float(res.fun)
    return Q0, f0


def _initial_simplex(dim, step):
    S = np.zeros((dim + 1, dim))
    S[1:] = np.eye(dim) * step
    return S


def _face_plane(Z, m, idx_local):
    """Plane parallel to the largest m-face of a max-volume simplex."""
    if idx_local is None:
        return None
    V = Z[list(idx_local)]
    faces = [np.delete(V, i, axis=0) for i in range(V.shape[0])]
    vols = [simplex_volume(f) for f in faces]
    F = faces[int(np.argmax(vols))]
    E = F[1:] - F[0]
    if np.linalg.matrix_rank(E) < m:
        return None
    return _orth(E.T)


def _beta_planes(Z, m, rng):
    """Candidate minimax planes, in tie-break order."""
    n = Z.shape[1]
    Q_low, rank = _low_rank_plane(Z, m)
    if m == n or rank <= m:
        return [(Q_low, _max_perp(Z, Q_low))]
    if m == n - 1:
        res = _hull_beta(Z)
        if res is not None:
            width, normal = res
            Q = _complement(normal[:, None])
            return [(Q, _max_perp(Z, Q))]
    objective = lambda Q: _max_perp(Z, Q)
    starts = [_lawson(Z, m, np.ones(Z.shape[0]))]
    for _ in range(3):
        starts.append(_lawson(Z, m, rng.dirichlet(np.ones(Z.shape[0]))))
    face = _face_plane(Z, m, _greedy_simplex(Z, m) if Z.shape[0] >= m + 2 else None)
    if face is not None:
        starts.append(face)
    return [_polish(objective, Q) for Q in starts]


def _pick(cands):
    vals = [v for _, v in cands]
    j = int(np.argmin(vals))
    return j, cands[j][0], cands[j][1]


def beta(cloud, x, r):
    """Beta number at ``(x, r)`` and a plane attaining it."""
    x, r, _, Z = _ball_offsets(cloud, x, r)
    _, Q, val = _pick(_beta_planes(Z, cloud.m, np.random.default_rng(_OPT_SEED)))
    return min(val / r, 1.0), Subspace(Q)


def beta_rotation_grid(cloud, x, r, n_angles=10_000):
    """Brute-force beta for lines in the plane: angle grid plus golden section.

    Independent of :func:`beta`; used as its oracle for ``(m, n) = (1, 2)``.
    """
    if cloud.n != 2 or cloud.m != 1:
        raise DomainError("rotation grid applies to lines in R^2 only")
    x, r, _, Z = _ball_offsets(cloud, x, r)

    def width(phi):
        return np.max(np.abs(Z[:, 0] * -np.sin(phi) + Z[:, 1] * np.cos(phi)))

    phis = np.linspace(0.0, np.pi, n_angles, endpoint=False)
    normals = np.stack([-np.sin(phis), np.cos(phis)])
    widths = np.max(np.abs(Z @ normals), axis=0)
    j = int(np.argmin(widths))
    h = np.pi / n_angles
    res = minimize_scalar(width, bracket=None, bounds=(phis[j] - h, phis[j] + h),
                          method="bounded", options={"xatol": 1e-13})
    phi = res.x if res.fun < widths[j] else phis[j]
    val = min(res.fun, widths[j])
    return float(val / r), Subspace(np.array([[np.cos(phi)], [np.sin(phi)]]))


def _disk_grid(m):
    """Unit m-disk sample used for the plane side of theta."""
    if m == 1:
        return np.linspace(-1.0, 1.0, 257)[:, None]
    if m == 2:
        t = np.arange(-24, 25) / 24.0
        g = np.array([(a, b) for a in t for b in t if a * a + b * b <= 1.0])
        ang = np.linspace(0, 2 * np.pi, 96, endpoint=False)
        return np.vstack([g, np.stack([np.cos(ang), np.sin(ang)], axis=1)])
    t = np.arange(-6, 7) / 6.0
    g = np.array([p for p in itertools.product(t, repeat=m) if np.dot(p, p) <= 1.0])
    return np.vstack([g, np.eye(m), -np.eye(m)])


class _ThetaObjective:
    def __init__(self, Z, r, m):
        self.Z = Z
        self.r = r
        self.tree = cKDTree(Z)
        self.grid = _disk_grid(m) * r

    def parts(self, Q):
        first = _max_perp(self.Z, Q)
        d, _ = self.tree.query(self.grid @ Q.T)
        return first, float(d.max())

    def __call__(self, Q):
        a, b = self.parts(Q)
        return a + b


def _flatness_core(cloud, x, r):
    """Shared beta/theta computation; returns (beta_abs, theta_abs, Q_beta, Q_theta, tie)."""
    x, r, idx, Z = _ball_offsets(cloud, x, r)
    m, n = cloud.m, cloud.n
    rng = np.random.default_rng(_OPT_SEED)
    _, Qb, bval = _pick(_beta_planes(Z, m, rng))
    obj = _ThetaObjective(Z, r, m)
    if m == n:
        return bval, obj(Qb), Qb, Qb, 0
    starts = [Qb, _pca_plane(Z, m)]
    if Z.shape[0] >= m + 2:
        face = _face_plane(Z, m, _greedy_simplex(Z, m))
        if face is not None:
            starts.append(face)
    if (n, m) == (2, 1):
        for phi in np.linspace(0, np.pi, 180, endpoint=False):
            starts.append(np.array([[np.cos(phi)], [np.sin(phi)]]))
    scored = [(Q, obj(Q)) for Q in starts]
    order = sorted(range(len(scored)), key=lambda i: (scored[i][1], i))[:3]
    polished = list(scored)
    for i in order:
        polished[i] = _polish(obj, scored[i][0], maxiter=300)
    tie, Qt, tval = _pick(polished)
    # any plane's first term bounds beta from above
    bval = min(bval, obj.parts(Qt)[0])
    return bval, tval, Qb, Qt, tie


def theta(cloud, x, r):
    """Theta number at ``(x, r)`` and the best approximating plane found."""
    r = check_positive(r, "r")
    _, tval, _, Qt, _ = _flatness_core(cloud, x, r)
    return tval / r, Subspace(Qt)


def best_approx_plane(cloud, x, r):
    return theta(cloud, x, r)[1]


def ahlfors_density(cloud, x, r):
    """Weight in the open ball divided by ``omega_m r^m``."""
    x = check_vector(x, cloud.n)
    r = check_positive(r, "r")
    idx = cloud.open_ball(x, r)
    return float(cloud.weights[idx].sum() / (unit_ball_volume(cloud.m) * r**cloud.m))


def scale_record(cloud, x, r):
    x = check_vector(x, cloud.n)
    r = check_positive(r, "r")
    bval, tval, _, Qt, tie = _flatness_core(cloud, x, r)
    return ScaleRecord(center=x.copy(), radius=r, beta=min(bval / r, 1.0), theta=tval / r,
                       best_plane=Subspace(Qt), ahlfors_ratio=ahlfors_density(cloud, x, r),
                       covering_radius=cloud.covering_radius, tie_index=tie)


def scale_records(cloud, centers, radii):
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    return [scale_record(cloud, c, r) for c in centers for r in radii]


def dyadic_radii(r_max, levels):
    """``r_max * 2^-k`` for ``k = 0 .. levels - 1``."""
    return [float(r_max) * 2.0 ** (-k) for k in range(int(levels))]


# ---------------------------------------------------------------------------
# max-volume simplices


def _farthest_pair(Z):
    best, pair = -1.0, (0, min(1, Z.shape[0] - 1))
    step = 2048
    for s in range(0, Z.shape[0], step):
        block = Z[s:s + step]
        d = np.einsum("ijk,ijk->ij", block[:, None] - Z[None], block[:, None] - Z[None]) \
            if Z.shape[0] * block.shape[0] <= 4_000_000 else None
        if d is None:
            for i, z in enumerate(block):
                dd = np.einsum("ij,ij->i", Z - z, Z - z)
                j = int(np.argmax(dd))
                if dd[j] > best:
                    best, pair = dd[j], (s + i, j)
            continue
        i, j = np.unravel_index(int(np.argmax(d)), d.shape)
        if d[i, j] > best:
            best, pair = d[i, j], (s + i, j)
    return pair


def _dist_to_hull(Z, verts):
    base = Z[verts[0]]
    E = Z[list(verts[1:])] - base
    W = Z - base
    if E.shape[0]:
        u, s, _ = np.linalg.svd(E.T, full_matrices=False)
        if s.size and s[0] > 0:
            u = u[:, s > RANK_TOL * s[0]]
            W = W - (W @ u) @ u.T
    return np.linalg.norm(W, axis=1)


def _greedy_simplex(Z, m, max_passes=50):
    """Farthest pair, then greedy height additions, then vertex swaps until
    no single replacement increases the volume."""
    k = m + 1
    verts = list(_farthest_pair(Z))
    while len(verts) < k + 1:
        d = _dist_to_hull(Z, verts)
        d[verts] = -1.0
        verts.append(int(np.argmax(d)))
    vol = simplex_volume(Z[verts])
    for _ in range(max_passes):
        improved = False
        for i in range(k + 1):
            rest = verts[:i] + verts[i + 1:]
            face_vol = simplex_volume(Z[rest])
            if face_vol == 0.0:
                continue
            d = _dist_to_hull(Z, rest)
            cand = d * face_vol / k
            j = int(np.argmax(cand))
            if cand[j] > vol * (1 + 1e-12) and j not in verts:
                verts[i] = j
                vol = simplex_volume(Z[verts])
                improved = True
        if not improved:
            break
    return tuple(verts)


def _exact_simplex(Z, m, chunk=100_000):
    combos = itertools.combinations(range(Z.shape[0]), m + 2)
    best, best_c = -1.0, None
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        arr = np.array(block)
        vols = simplex_volumes(Z[arr])
        j = int(np.argmax(vols))
        if vols[j] > best:
            best, best_c = vols[j], tuple(int(t) for t in arr[j])
    return best_c


def max_volume_simplex(cloud, x, r, mode="exact", max_exact=60):
    """(m+1)-simplex of maximal volume with vertices in the closed ball.

    ``exact`` enumerates every (m+2)-subset (at most ``max_exact``
    candidates); ``greedy`` builds one and swaps vertices to a local
    optimum. The returned simplex carries cloud indices.
    """
    x, r, idx, Z = _ball_offsets(cloud, x, r)
    m = cloud.m
    if idx.size < m + 2:
        raise DomainError(f"ball holds {idx.size} samples; need at least {m + 2}")
    if mode == "exact":
        if idx.size > max_exact:
            raise DomainError(
                f"exact mode is limited to {max_exact} candidates, ball holds {idx.size}")
        local = _exact_simplex(Z, m)
    elif mode == "greedy":
        local = _greedy_simplex(Z, m)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    ids = tuple(int(idx[i]) for i in local)
    return Simplex(cloud.points[list(ids)], indices=ids)


def beta_upper_from_simplex(cloud, x, r, mode=None):
    """``2 h_min(T) / r`` for a (locally) max-volume simplex T in the ball.

    Bounds beta from above whenever ``x`` is itself a sample: both exact
    and swap-converged greedy simplices admit no single-vertex improvement.
    """
    if mode is None:
        mode = "exact" if cloud.ball(x, r).size <= 60 else "greedy"
    T = max_volume_simplex(cloud, x, r, mode=mode)
    return 2.0 * T.min_height() / r


# ---------------------------------------------------------------------------
# tangent planes


def _usable(Z, m):
    if Z.shape[0] < m + 1:
        return False
    _, rank = _low_rank_plane(Z, m)
    return rank >= m


def _plane_at(cloud, x, r, plane):
    if plane == "beta":
        return beta(cloud, x, r)[1]
    if plane == "bap":
        return best_approx_plane(cloud, x, r)
    raise DomainError(f"unknown plane estimator {plane!r}")


def tangent_estimate(cloud, x, radii, plane="bap"):
    """Best approximating plane at the smallest usable radius.

    A radius is usable when its closed ball holds at least m + 1 samples
    whose offsets from ``x`` have rank m. ``increments`` are the
    Grassmann distances between planes at consecutive usable radii.
    """
    x = check_vector(x, cloud.n)
    radii = sorted((float(r) for r in radii), reverse=True)
    used, planes = [], []
    for r in radii:
        if r <= 0:
            continue
        idx = cloud.ball(x, r)
        if idx.size == 0 or not _usable(cloud.points[idx] - x, cloud.m):
            continue
        used.append(r)
        planes.append(_plane_at(cloud, x, r, plane))
    if not planes:
        raise DomainError("rank collapse: no radius gives m + 1 samples spanning rank m")
    inc = tuple(grassmann_distance(a, b) for a, b in zip(planes, planes[1:]))
    return TangentEstimate(plane=planes[-1], radius=used[-1], radii=tuple(used),
                           planes=tuple(planes), increments=inc)


def default_tangent_radii(cloud, r_max, levels=4):
    """Dyadic radii from ``r_max`` down, stopping at twice the covering radius."""
    floor = 2.0 * cloud.covering_radius
    radii = [r for r in dyadic_radii(r_max, 40) if r >= floor][:levels]
    return radii or [max(r_max, floor)]


def tangent_oscillation(cloud, x, y, radii, plane="bap"):
    """Grassmann distance between the tangent estimates at ``x`` and ``y``."""
    tx = tangent_estimate(cloud, x, radii, plane).plane
    ty = tangent_estimate(cloud, y, radii, plane).plane
    return grassmann_distance(tx, ty)


def graph_patch_check(cloud, x, r, fiber_tol, tangent=None, radii=None):
    """Is the sample in the ball a graph over the tangent plane at ``x``?

    Points are binned by their tangent coordinates (pitch ``fiber_tol``);
    every bin's normal components must spread by at most ``2 fiber_tol``.
    Returns ``(ok, violations)``; each violation is a dict with the bin,
    its spread and the offending sample indices.
    """
    x = check_vector(x, cloud.n)
    fiber_tol = check_positive(fiber_tol, "fiber_tol")
    if tangent is None:
        if radii is None:
            radii = default_tangent_radii(cloud, r)
        tangent = tangent_estimate(cloud, x, radii).plane
    idx = cloud.ball(x, r)
    W = cloud.points[idx] - x
    u = W @ tangent.frame
    perp = W - u @ tangent.frame.T
    keys = np.floor(u / fiber_tol).astype(np.int64)
    bins = {}
    for row, key in enumerate(map(tuple, keys)):
        bins.setdefault(key, []).append(row)
    violations = []
    for key, rows in sorted(bins.items()):
        if len(rows) < 2:
            continue
        P = perp[rows]
        diff = P[:, None, :] - P[None, :, :]
        spread = float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max()))
        if spread > 2.0 * fiber_tol:
            violations.append({"bin": key, "spread": spread,
                               "indices": [int(idx[j]) for j in rows]})
    return not violations, violations


# ---------------------------------------------------------------------------
# exponent fits


def power_law_fit(scales, values):
    s = np.asarray(scales, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    keep = np.isfinite(s) & np.isfinite(v) & (s > 0) & (v > 0)
    s, v = s[keep], v[keep]
    if s.size < 4:
        raise DomainError(f"need at least 4 positive records for a fit, have {s.size}")
    ls, lv = np.log(s), np.log(v)
    A = np.stack([ls, np.ones_like(ls)], axis=1)
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - A @ coef
    return ScalingFit(exponent=float(coef[0]), intercept=float(coef[1]),
                      r_range=(float(s.min()), float(s.max())),
                      residual=float(np.sqrt(np.mean(resid**2))), n_records=int(s.size))


def scaling_fit(records, field="beta"):
    """Log-log slope of ``field`` (beta, theta or oscillation) against radius."""
    if field not in ("beta", "theta", "oscillation"):
        raise DomainError(f"unknown field {field!r}")
    return power_law_fit([rec.radius for rec in records],
                         [getattr(rec, field) for rec in records])


def oscillation_records(cloud, x, others, radii, plane="bap"):
    x = check_vector(x, cloud.n)
    tx = tangent_estimate(cloud, x, radii, plane).plane
    out = []
    for y in np.atleast_2d(others):
        ty = tangent_estimate(cloud, y, radii, plane).plane
        out.append(OscillationRecord(center=x, other=np.asarray(y), radius=float(np.linalg.norm(y - x)),
                                     oscillation=grassmann_distance(tx, ty)))
    return out
