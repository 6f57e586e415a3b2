"""Synthetic weighted clouds, triangle meshes and the CSV cloud format.

Generators assign quadrature weights so that the total weight equals the
m-dimensional measure of the sampled set: exactly for circles, spheres,
tori and flat disks, and the polyline length for graphs and Koch curves.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cloud import WeightedCloud
from .exceptions import DomainError, MeshParseError
from .geometry import unit_ball_volume

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def _embed(P, n):
    if n < P.shape[1]:
        raise DomainError(f"ambient dimension {n} is smaller than {P.shape[1]}")
    if n == P.shape[1]:
        return P
    return np.hstack([P, np.zeros((P.shape[0], n - P.shape[1]))])


def _finish(points, weights, m, provenance, **meta):
    cloud = WeightedCloud(points, weights, m, provenance)
    cloud.meta.update(meta)
    cloud.meta["covering_radius"] = cloud.covering_radius
    return cloud


def _check_count(N, m):
    if int(N) != N or N < m + 2:
        raise DomainError(f"need at least {m + 2} samples, got {N}")
    return int(N)


def circle(N, radius=1.0, n=2):
    """N equally spaced points on a circle, each weighted by its arc."""
    N = _check_count(N, 1)
    if radius <= 0:
        raise DomainError("radius must be positive")
    t = 2.0 * np.pi * np.arange(N) / N
    P = _embed(radius * np.stack([np.cos(t), np.sin(t)], axis=1), n)
    return _finish(P, np.full(N, 2.0 * np.pi * radius / N), 1, f"circle(N={N}, radius={radius})")


def sphere_area(m, radius=1.0):
    """Measure of the round m-sphere of the given radius."""
    return (m + 1) * unit_ball_volume(m + 1) * radius**m


def sphere(N, m=2, n=None, radius=1.0, seed=0):
    """Sample of the round m-sphere in R^n.

    m = 1 is the equispaced circle, m = 2 a Fibonacci lattice; higher m
    uses seeded uniform random points. Weights are equal.
    """
    n = m + 1 if n is None else n
    if m == 1:
        return circle(N, radius, n)
    N = _check_count(N, m)
    if m == 2:
        i = np.arange(N) + 0.5
        z = 1.0 - 2.0 * i / N
        phi = 2.0 * np.pi * i / GOLDEN
        rho = np.sqrt(1.0 - z**2)
        P = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    else:
        P = np.random.default_rng(seed).normal(size=(N, m + 1))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
    P = _embed(radius * P, n)
    w = np.full(N, sphere_area(m, radius) / N)
    return _finish(P, w, m, f"sphere(N={N}, m={m}, n={n}, radius={radius})")


def torus(N, R=2.0, r=1.0):
    """Product grid on the torus of revolution with Jacobian weights.

    The weights ``r (R + r cos v) du dv`` sum to ``4 pi^2 R r``.
    """
    N = _check_count(N, 2)
    if not 0 < r < R:
        raise DomainError(f"need 0 < r < R, got r={r}, R={R}")
    nu = max(3, int(round(math.sqrt(N * R / r))))
    nv = max(3, math.ceil(N / nu))
    u = 2.0 * np.pi * np.arange(nu) / nu
    v = 2.0 * np.pi * np.arange(nv) / nv
    U, V = np.meshgrid(u, v, indexing="ij")
    U, V = U.ravel(), V.ravel()
    P = np.stack([(R + r * np.cos(V)) * np.cos(U), (R + r * np.cos(V)) * np.sin(U),
                  r * np.sin(V)], axis=1)
    w = r * (R + r * np.cos(V)) * (2 * np.pi / nu) * (2 * np.pi / nv)
    # sum(cos v) over a full period vanishes only up to rounding; restore the exact total
    w *= 4.0 * np.pi**2 * R * r / w.sum()
    return _finish(P, w, 2, f"torus(N={N}, R={R}, r={r})")


_GRAPH_FUNCS = {
    "square": lambda t, s: t**2,
    "abs_pow": lambda t, s: np.abs(t) ** (1.0 + s),
}


def graph(f, N=20001, domain=(-1.0, 1.0), s=0.5):
    """Graph ``{(t, f(t))}`` over an equispaced grid of ``domain``.

    ``f`` is ``"square"``, ``"abs_pow"`` (``|t|^(1+s)``) or a vectorized
    callable. Weights are half the adjacent chord lengths, so the total is
    the polyline length. An odd N puts a sample on the midpoint.
    """
    N = _check_count(N, 1)
    a, b = map(float, domain)
    if not a < b:
        raise DomainError(f"empty domain {domain}")
    t = np.linspace(a, b, N)
    if isinstance(f, str):
        if f not in _GRAPH_FUNCS:
            raise DomainError(f"unknown graph function {f!r}")
        y = _GRAPH_FUNCS[f](t, s)
        name = f if f == "square" else f"abs_pow(s={s})"
    else:
        y = np.asarray(f(t), dtype=np.float64)
        name = getattr(f, "__name__", "callable")
    P = np.stack([t, y], axis=1)
    if not np.all(np.isfinite(P)):
        raise DomainError("graph function produced non-finite values")
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    w = np.zeros(N)
    w[:-1] += seg / 2
    w[1:] += seg / 2
    return _finish(P, w, 1, f"graph({name}, N={N}, domain={domain})")


def koch_polygon(level):
    """Vertices of the level-L Koch snowflake on the unit equilateral triangle."""
    if int(level) != level or level < 0:
        raise DomainError(f"level must be a nonnegative integer, got {level}")
    V = np.array([[0.0, 0.0], [0.5, math.sqrt(3) / 2], [1.0, 0.0]])
    rot = np.array([[0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, 0.5]])
    for _ in range(int(level)):
        A = V
        B = np.roll(V, -1, axis=0)
        D = (B - A) / 3.0
        p1 = A + D
        p3 = A + 2 * D
        p2 = p1 + D @ rot.T
        V = np.stack([A, p1, p2, p3], axis=1).reshape(-1, 2)
    return V


def koch(level, per_segment=4):
    """Equal-weight sample of the level-L Koch polygon.

    Each of the ``3 * 4^L`` edges gets ``per_segment`` points; the total
    weight is the polygon length ``3 (4/3)^L``.
    """
    per_segment = int(per_segment)
    if per_segment < 1:
        raise DomainError("per_segment must be positive")
    V = koch_polygon(level)
    A = V
    B = np.roll(V, -1, axis=0)
    s = np.arange(per_segment) / per_segment
    P = (A[:, None, :] + s[None, :, None] * (B - A)[:, None, :]).reshape(-1, 2)
    seg_len = 3.0 ** (-int(level))
    w = np.full(P.shape[0], seg_len / per_segment)
    return _finish(P, w, 1, f"koch(level={level}, per_segment={per_segment})")


def plane_with_hole(N, rho=0.0, radius=1.0, n=3):
    """Flat annulus ``rho <= |x| <= radius`` in the first two coordinates.

    Concentric rings of near-uniform spacing; each ring's weight is its
    annulus area, so the total is ``pi (radius^2 - rho^2)``. ``rho = 0``
    gives a full disk.
    """
    N = _check_count(N, 2)
    if not 0 <= rho < radius:
        raise DomainError(f"need 0 <= rho < radius, got rho={rho}, radius={radius}")
    h = math.sqrt(math.pi * (radius**2 - rho**2) / N)
    K = max(1, math.ceil((radius - rho) / h))
    edges = np.linspace(rho, radius, K + 1)
    pts, wts = [], []
    for k in range(K):
        r_mid = 0.5 * (edges[k] + edges[k + 1])
        count = max(3, int(round(2 * math.pi * r_mid / h)))
        ang = 2 * math.pi * (np.arange(count) / count + k / GOLDEN)
        pts.append(np.stack([r_mid * np.cos(ang), r_mid * np.sin(ang)], axis=1))
        wts.append(np.full(count, math.pi * (edges[k + 1] ** 2 - edges[k] ** 2) / count))
    P = _embed(np.vstack(pts), n)
    return _finish(P, np.concatenate(wts), 2, f"plane_with_hole(N={N}, rho={rho}, radius={radius})")


def plane(N, radius=1.0, n=3):
    return plane_with_hole(N, 0.0, radius, n)


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a synthetic cloud; ``params`` are generator keywords."""

    kind: str
    N: int
    seed: int = 0
    params: dict = field(default_factory=dict)


_KINDS = {
    "circle": lambda s: circle(s.N, **s.params),
    "sphere": lambda s: sphere(s.N, seed=s.seed, **s.params),
    "torus": lambda s: torus(s.N, **s.params),
    "graph": lambda s: graph(N=s.N, **s.params),
    "koch": lambda s: koch(**s.params),
    "plane": lambda s: plane(s.N, **s.params),
    "plane_with_hole": lambda s: plane_with_hole(s.N, **s.params),
}


def generate(spec):
    if spec.kind not in _KINDS:
        raise DomainError(f"unknown generator {spec.kind!r}; choose from {sorted(_KINDS)}")
    try:
        return _KINDS[spec.kind](spec)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {spec.kind}: {exc}") from exc


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True, eq=False)
class MeshSurface:
    vertices: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray = None

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=np.float64)
        T = np.asarray(self.triangles, dtype=np.intp).reshape(-1, 3)
        if V.ndim != 2 or V.shape[1] != 3:
            raise DomainError(f"mesh vertices must be (N, 3), got {V.shape}")
        if T.size and (T.min() < 0 or T.max() >= V.shape[0]):
            raise DomainError("triangle index out of range")
        e1 = V[T[:, 1]] - V[T[:, 0]]
        e2 = V[T[:, 2]] - V[T[:, 0]]
        A = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)
        object.__setattr__(self, "areas", A)

    @property
    def degenerate(self):
        """Mask of zero-area triangles."""
        return self.areas == 0.0

    @property
    def total_area(self):
        return float(self.areas.sum())


def _floats(tokens, lineno, count=None):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise MeshParseError(f"expected numbers, got {' '.join(tokens)!r}", line=lineno) from None
    if count is not None and len(vals) < count:
        raise MeshParseError(f"expected {count} values, got {len(vals)}", line=lineno)
    if not all(math.isfinite(v) for v in vals):
        raise MeshParseError("non-finite coordinate", line=lineno)
    return vals


def _fan(face):
    return [(face[0], face[i], face[i + 1]) for i in range(1, len(face) - 1)]


def _parse_off(lines):
    body = [(i + 1, ln.split("#", 1)[0].split()) for i, ln in enumerate(lines)]
    body = [(i, t) for i, t in body if t]
    if not body or not body[0][1][0].endswith("OFF"):
        raise MeshParseError("missing OFF header", line=body[0][0] if body else 1)
    pos = 0
    head = body[0][1][1:]
    if not head:
        pos = 1
        if pos >= len(body):
            raise MeshParseError("missing vertex/face counts", line=body[0][0])
        lineno, head = body[pos]
    else:
        lineno = body[0][0]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise MeshParseError("bad vertex/face counts", line=lineno) from None
    pos += 1
    if len(body) < pos + nv + nf:
        raise MeshParseError(f"file ends early: expected {nv} vertices and {nf} faces",
                             line=body[-1][0])
    V = []
    for lineno, tok in body[pos:pos + nv]:
        V.append(_floats(tok, lineno, 3)[:3])
    T = []
    for lineno, tok in body[pos + nv:pos + nv + nf]:
        try:
            k = int(tok[0])
            face = [int(t) for t in tok[1:1 + k]]
        except ValueError:
            raise MeshParseError("bad face record", line=lineno) from None
        if k < 3 or len(face) != k:
            raise MeshParseError("face needs at least 3 vertex indices", line=lineno)
        if min(face) < 0 or max(face) >= nv:
            raise MeshParseError("face index out of range", line=lineno)
        T.extend(_fan(face))
    return V, T


_OBJ_IGNORED = {"vn", "vt", "o", "g", "s", "usemtl", "mtllib"}


def _parse_obj(lines):
    V, T = [], []
    for i, raw in enumerate(lines):
        lineno = i + 1
        tok = raw.split("#", 1)[0].split()
        if not tok:
            continue
        key = tok[0]
        if key == "v":
            V.append(_floats(tok[1:], lineno, 3)[:3])
        elif key == "f":
            face = []
            for t in tok[1:]:
                try:
                    j = int(t.split("/")[0])
                except ValueError:
                    raise MeshParseError(f"bad face index {t!r}", line=lineno) from None
                j = j - 1 if j > 0 else len(V) + j
                if not 0 <= j < len(V):
                    raise MeshParseError("face index out of range", line=lineno)
                face.append(j)
            if len(face) < 3:
                raise MeshParseError("face needs at least 3 vertex indices", line=lineno)
            T.extend(_fan(face))
        elif key not in _OBJ_IGNORED:
            raise MeshParseError(f"unsupported record {key!r}", line=lineno)
    return V, T


def load_mesh(path):
    """Read an OFF or OBJ (v/f records) triangle mesh; polygons are fanned."""
    ext = os.path.splitext(str(path))[1].lower()
    with open(path) as fh:
        lines = fh.read().splitlines()
    if ext == ".off":
        V, T = _parse_off(lines)
    elif ext == ".obj":
        V, T = _parse_obj(lines)
    else:
        raise DomainError(f"unsupported mesh format {ext!r}; use .off or .obj")
    if not V or not T:
        raise MeshParseError("mesh has no vertices or no faces")
    mesh = MeshSurface(np.array(V), np.array(T))
    if mesh.total_area == 0.0:
        raise DomainError("mesh has zero total area")
    return mesh


def sample_mesh(mesh, N, seed=0):
    """Area-stratified sample: ``ceil(N a_t / A)`` uniform points per
    triangle, each weighted ``a_t / count``, so weights sum to the area."""
    A = mesh.total_area
    if A == 0.0:
        raise DomainError("mesh has zero total area")
    if int(N) != N or N < 1:
        raise DomainError(f"sample count must be a positive integer, got {N}")
    rng = np.random.default_rng(seed)
    keep = np.flatnonzero(mesh.areas > 0)
    counts = np.ceil(N * mesh.areas[keep] / A).astype(np.intp)
    tri = np.repeat(keep, counts)
    u = rng.random((tri.size, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1.0 - u[flip]
    V = mesh.vertices
    T = mesh.triangles[tri]
    P = V[T[:, 0]] + u[:, :1] * (V[T[:, 1]] - V[T[:, 0]]) + u[:, 1:] * (V[T[:, 2]] - V[T[:, 0]])
    w = np.repeat(mesh.areas[keep] / counts, counts)
    return _finish(P, w, 2, f"mesh(N={N}, seed={seed})")


def icosphere(level=2):
    """Subdivided icosahedron with vertices on the unit sphere."""
    t = GOLDEN
    V = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    F = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    V = [np.array(v, dtype=float) / np.linalg.norm(v) for v in V]
    for _ in range(int(level)):
        cache, nF = {}, []

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = V[a] + V[b]
                V.append(p / np.linalg.norm(p))
                cache[key] = len(V) - 1
            return cache[key]

        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nF += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        F = nF
    return MeshSurface(np.array(V), np.array(F))


def write_off(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(mesh.vertices)} {len(mesh.triangles)} 0\n")
        for v in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in v) + "\n")
        for t in mesh.triangles:
            fh.write("3 " + " ".join(str(int(i)) for i in t) + "\n")


# ---------------------------------------------------------------------------
# CSV clouds


def save_cloud_csv(cloud, path):
    """``# n=<n> m=<m>`` header, then coordinates and weight per row.

    Floats are written with ``repr`` so reading back is bit-exact.
    """
    with open(path, "w") as fh:
        fh.write(f"# n={cloud.n} m={cloud.m}\n")
        for p, w in zip(cloud.points, cloud.weights):
            fh.write(",".join(repr(float(c)) for c in p) + "," + repr(float(w)) + "\n")


def load_cloud_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MeshParseError("empty cloud file", line=1)
    head = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split() if "=" in tok)
    if not lines[0].startswith("#") or "n" not in head or "m" not in head:
        raise MeshParseError("header must read '# n=<n> m=<m>'", line=1)
    try:
        n, m = int(head["n"]), int(head["m"])
    except ValueError:
        raise MeshParseError("header must read '# n=<n> m=<m>'", line=1) from None
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        vals = _floats(ln.split(","), i)
        if len(vals) != n + 1:
            raise MeshParseError(f"expected {n + 1} values, got {len(vals)}", line=i)
        rows.append(vals)
    if not rows:
        raise MeshParseError("cloud file has no points", line=len(lines))
    A = np.array(rows)
    return WeightedCloud(A[:, :n], A[:, n], m, f"csv:{os.path.basename(str(path))}")
