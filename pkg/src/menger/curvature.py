"""Discrete curvatures and the integral energies built from them.

All curvatures scale like inverse length and vanish on degenerate
tuples, including tuples with coincident points. Energies are weighted
sums over ordered tuples drawn *with* repetition; repeated points give a
degenerate simplex and therefore contribute nothing.

The inner supremum over free vertices is a search over the sample, so
every estimate is a lower bound for the discrete functional unless the
search was exhaustive.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_vector
from .cloud import WeightedCloud
from .exceptions import BudgetError, DomainError
from .flatness import default_tangent_radii, tangent_estimate
from .geometry import (min_heights, simplex_diameter, simplex_diameters, simplex_volume,
                       simplex_volumes, varsigma)

CHUNK = 1024


def _tuple(points, count=None, name="points"):
    P = np.array(points, dtype=np.float64, ndmin=2)
    if P.ndim != 2 or (count is not None and P.shape[0] != count):
        raise DomainError(f"{name}: expected {count} points, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise DomainError(f"{name}: coordinates must be finite")
    return P


def menger_c(x0, x1, x2):
    """Inverse circumradius of the triangle; 0 for collinear or coincident points."""
    P = _tuple([np.ravel(x0), np.ravel(x1), np.ravel(x2)], 3)
    a = np.linalg.norm(P[0] - P[1])
    b = np.linalg.norm(P[1] - P[2])
    c = np.linalg.norm(P[2] - P[0])
    if a == 0 or b == 0 or c == 0:
        return 0.0
    d = max(a, b, c)
    return float(4.0 * simplex_volume((P - P[0]) / d) / ((a / d) * (b / d) * (c / d)) / d)


def kappa(T):
    """``H^{k}(simp T) / diam(T)^{k+1}`` for a tuple of k + 1 points."""
    P = _tuple(getattr(T, "vertices", T), name="T")
    if P.shape[0] < 2:
        raise DomainError("kappa needs at least two points")
    d = simplex_diameter(P)
    if d == 0.0:
        return 0.0
    # normalize first: d ** (k + 1) underflows for tiny simplices
    return float(simplex_volume((P - P[0]) / d) / d)


def kappa_batch(batch):
    """Vectorized :func:`kappa` over a ``(B, k + 1, n)`` array."""
    batch = np.asarray(batch, dtype=np.float64)
    d = simplex_diameters(batch)
    out = np.zeros(batch.shape[0])
    ok = d > 0
    if np.any(ok):
        B = batch[ok]
        out[ok] = simplex_volumes((B - B[:, :1]) / d[ok, None, None]) / d[ok]
    return out


def kappa_prime(T):
    """``h_min(T) / diam(T)^2``."""
    P = _tuple(getattr(T, "vertices", T), name="T")
    if P.shape[0] < 2:
        raise DomainError("kappa_prime needs at least two points")
    d = simplex_diameter(P)
    if d == 0.0:
        return 0.0
    return float(min_heights(((P - P[0]) / d)[None])[0] / d)


def kappa_svdm(x0, x1, x2, x3):
    """Volume over (surface area times squared diameter) of a tetrahedron in R^3."""
    P = _tuple([np.ravel(v) for v in (x0, x1, x2, x3)], 4)
    if P.shape[1] != 3:
        raise DomainError(f"kappa_svdm is defined in R^3, got R^{P.shape[1]}")
    d = simplex_diameter(P)
    if d == 0.0:
        return 0.0
    P = (P - P[0]) / d
    vol = simplex_volume(P)
    if vol == 0.0:
        return 0.0
    area = sum(simplex_volume(np.delete(P, i, axis=0)) for i in range(4))
    return float(vol / area / d)


# ---------------------------------------------------------------------------
# tangent-point radius


def tangent_field(cloud, indices=None, radius=None, plane="beta"):
    """Tangent planes at the given sample indices (all by default).

    Each plane is the estimate at the smallest usable radius among
    ``radius * 2^j``, ``j = 0..3``; ``radius`` defaults to four times the
    covering radius.
    """
    if indices is None:
        indices = range(len(cloud))
    if radius is None:
        radius = 4.0 * cloud.covering_radius
    radii = [radius * 2.0**j for j in range(4)]
    return {int(i): tangent_estimate(cloud, cloud.points[i], radii, plane).plane
            for i in indices}


def _inverse_radius(tangent, x, Y):
    """``1 / R_tp(x, y)`` for the rows of Y; 0 where y = x or y - x is tangent."""
    W = Y - x
    sq = np.einsum("ij,ij->i", W, W)
    R = W - (W @ tangent.frame) @ tangent.frame.T
    perp = np.sqrt(np.einsum("ij,ij->i", R, R))
    out = np.zeros(W.shape[0])
    ok = (sq > 0) & (perp > 1e-12 * np.sqrt(sq))
    out[ok] = 2.0 * perp[ok] / sq[ok]
    return out


def tangent_point_radius(cloud, x, y, tangent=None, radii=None):
    """Radius of the sphere tangent at ``x`` to the cloud that passes through ``y``.

    Returns ``None`` when ``y - x`` lies in the tangent plane (infinite radius).
    """
    x = check_vector(x, cloud.n, name="x")
    y = check_vector(y, cloud.n, name="y")
    if np.array_equal(x, y):
        raise DomainError("tangent-point radius needs y != x")
    if tangent is None:
        if radii is None:
            radii = default_tangent_radii(cloud, 8.0 * cloud.covering_radius)
        tangent = tangent_estimate(cloud, x, radii).plane
    inv = _inverse_radius(tangent, x, y[None])[0]
    return None if inv == 0.0 else float(1.0 / inv)


# ---------------------------------------------------------------------------
# inner supremum


@dataclass(frozen=True)
class SearchParams:
    """Budget for the supremum over free vertices.

    Exhaustive enumeration is used whenever the number of free tuples is
    at most ``exhaustive_budget``.
    """

    n_random: int = 256
    n_refine: int = 4
    k_neighbors: int = 8
    exhaustive_budget: int = 20_000

    def __post_init__(self):
        for name in ("n_random", "n_refine", "k_neighbors", "exhaustive_budget"):
            if int(getattr(self, name)) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.n_random < 1:
            raise DomainError("n_random must be at least 1")


@dataclass(frozen=True)
class SupResult:
    value: float
    free: tuple
    exhaustive: bool
    n_evaluated: int
    trace: tuple = ()


def _eval(cloud, fixed, free_idx):
    free_idx = np.atleast_2d(free_idx)
    B = free_idx.shape[0]
    batch = np.concatenate([np.broadcast_to(fixed, (B,) + fixed.shape),
                            cloud.points[free_idx]], axis=1)
    return kappa_batch(batch)


def _n_free_tuples(N, free):
    return math.comb(N, free)


def _exhaustive_sup(cloud, fixed, free):
    best, arg, count = 0.0, (), 0
    combos = itertools.combinations(range(len(cloud)), free)
    while True:
        block = np.array(list(itertools.islice(combos, 50_000)), dtype=np.intp)
        if block.size == 0:
            break
        vals = _eval(cloud, fixed, block)
        count += vals.size
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, arg = float(vals[j]), tuple(int(t) for t in block[j])
    return SupResult(best, arg, True, count)


def _climb(cloud, fixed, start, value, search):
    cur, best = np.array(start), value
    trace = [best]
    k = min(search.k_neighbors + 1, len(cloud))
    for _ in range(search.n_refine):
        improved = False
        for j in range(cur.size):
            _, nbrs = cloud.tree.query(cloud.points[cur[j]], k=k)
            cand = np.repeat(cur[None], np.size(nbrs), axis=0)
            cand[:, j] = np.atleast_1d(nbrs)
            vals = _eval(cloud, fixed, cand)
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, cur, improved = float(vals[i]), cand[i], True
        trace.append(best)
        if not improved:
            break
    return best, tuple(int(t) for t in cur), trace


def sup_kappa_search(cloud, fixed, search=None, seed=0):
    """Best curvature over completions of ``fixed`` by sample points.

    Random mode draws ``n_random`` free tuples and hill-climbs over
    k-nearest neighbours from every draw that sets a new running record,
    so enlarging ``n_random`` never lowers the result.
    """
    search = SearchParams() if search is None else search
    m = cloud.m
    fixed = _tuple(fixed, name="fixed")
    if fixed.shape[1] != cloud.n:
        raise DomainError(f"fixed points live in R^{fixed.shape[1]}, cloud in R^{cloud.n}")
    free = m + 2 - fixed.shape[0]
    if free < 0:
        raise DomainError(f"at most {m + 2} fixed points allowed, got {fixed.shape[0]}")
    if free == 0:
        return SupResult(kappa(fixed), (), True, 1)
    N = len(cloud)
    if N < free:
        raise DomainError(f"need {free} free points, cloud has {N}")
    if _n_free_tuples(N, free) <= search.exhaustive_budget:
        return _exhaustive_sup(cloud, fixed, free)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.integers(0, N, size=(search.n_random, free))
    vals = _eval(cloud, fixed, draws)
    best, arg, trace = 0.0, tuple(int(t) for t in draws[0]), []
    record = -1.0
    for i in range(draws.shape[0]):
        if vals[i] <= record:
            continue
        record = vals[i]
        v, a, tr = _climb(cloud, fixed, draws[i], float(vals[i]), search)
        if v > best or not trace:
            best, arg, trace = v, a, tr
    return SupResult(best, arg, False, int(draws.shape[0]), tuple(trace))


def sup_kappa(cloud, fixed, search=None, seed=0):
    """Lower bound for ``sup K(fixed, free)`` over free vertices in the cloud."""
    return sup_kappa_search(cloud, fixed, search, seed).value


# ---------------------------------------------------------------------------
# energies


@dataclass(frozen=True)
class EnergyParams:
    p: float
    l: int
    m: int

    def __post_init__(self):
        check_positive(self.p, "p")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m}")
        if int(self.l) != self.l or not 1 <= self.l <= self.m + 2:
            raise DomainError(f"l must lie in 1..{self.m + 2}, got {self.l}")

    @property
    def lambda_(self):
        return self.p - self.m * self.l

    @property
    def kappa(self):
        return (self.p + self.m * self.l) * (self.m + 1)

    @property
    def alpha(self):
        return 1.0 - self.m * self.l / self.p

    def as_dict(self):
        return {"m": self.m, "l": self.l, "p": self.p, "lambda": self.lambda_,
                "kappa": self.kappa, "alpha": self.alpha}


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    std_error: float | None
    mode: str
    n_outer_tuples: int
    inner: dict
    seed: int | None
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "mode": self.mode,
                "n_outer_tuples": self.n_outer_tuples, "inner": dict(self.inner),
                "seed": self.seed, "params": dict(self.params)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get("MENGER_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise DomainError(f"thread count must be positive, got {threads}")
    return int(threads)


def _chunked(n_total, seed, fn, threads):
    """Run ``fn(start, count, rng)`` over fixed-size chunks with per-chunk
    seeds and concatenate in chunk order, independent of ``threads``."""
    n_chunks = max(1, math.ceil(n_total / CHUNK))
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    jobs = [(c * CHUNK, min(CHUNK, n_total - c * CHUNK), seeds[c]) for c in range(n_chunks)]
    run = lambda job: fn(job[0], job[1], np.random.default_rng(job[2]))
    if threads == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    return np.concatenate(parts) if parts else np.zeros(0)


def _check_params(cloud, params):
    if cloud.m != params.m:
        raise DomainError(f"cloud has m={cloud.m} but params have m={params.m}")


def exhaustive_cost(n_points, params):
    """Number of simplex evaluations an exhaustive energy run needs."""
    return math.comb(n_points, params.l) * math.comb(n_points, params.m + 2 - params.l)


def energy(cloud, params, mode="monte_carlo", budget=100_000, seed=0, search=None,
           threads=None):
    """Discrete ``E_p^l``: sum over ordered l-tuples of the weight product
    times the p-th power of the inner supremum.

    ``exhaustive`` enumerates every tuple and every completion and refuses
    with :class:`BudgetError` when that exceeds ``budget`` evaluations.
    ``monte_carlo`` draws ``budget`` tuples proportionally to the weights
    and rescales the mean by ``W^l``.
    """
    _check_params(cloud, params)
    search = SearchParams() if search is None else search
    l, p, N = params.l, params.p, len(cloud)
    inner = {"n_random": search.n_random, "n_refine_rounds": search.n_refine}
    if mode == "exhaustive":
        required = exhaustive_cost(N, params)
        if required > budget:
            raise BudgetError(f"exhaustive energy needs {required} simplex evaluations, "
                              f"budget is {budget}", required=required, budget=budget)
        total = 0.0
        free = params.m + 2 - l
        combos = itertools.combinations(range(N), l)
        w = cloud.weights
        while True:
            block = np.array(list(itertools.islice(combos, 20_000)), dtype=np.intp)
            if block.size == 0:
                break
            if free == 0:
                sup = kappa_batch(cloud.points[block])
            else:
                sup = np.array([_exhaustive_sup(cloud, cloud.points[t], free).value
                                for t in block])
            total += float(np.sum(np.prod(w[block], axis=1) * sup**p))
        # each unordered set of distinct points stands for l! ordered tuples
        value = math.factorial(l) * total
        return EnergyEstimate(value, None, "exhaustive", math.comb(N, l),
                              {"n_random": 0, "n_refine_rounds": 0}, seed, params.as_dict())
    if mode != "monte_carlo":
        raise DomainError(f"unknown mode {mode!r}")
    n = int(budget)
    if n < 2:
        raise DomainError("monte_carlo needs at least 2 tuples")
    prob = cloud.weights / cloud.total_weight

    def chunk(start, count, rng):
        idx = rng.choice(N, size=(count, l), p=prob)
        if l == params.m + 2:
            return kappa_batch(cloud.points[idx]) ** p
        return np.array([sup_kappa(cloud, cloud.points[t], search, rng) for t in idx]) ** p

    vals = _chunked(n, seed, chunk, resolve_threads(threads))
    scale = cloud.total_weight**l
    return EnergyEstimate(float(vals.mean() * scale), float(vals.std(ddof=1) / math.sqrt(n) * scale),
                          "monte_carlo", n, inner, seed, params.as_dict())


def energy_tp(cloud, p, mode="monte_carlo", budget=100_000, seed=0, tangents=None,
              threads=None):
    """Discrete tangent-point energy ``sum_i sum_j w_i w_j R_tp(x_i, x_j)^{-p}``.

    ``tangents`` maps sample indices to planes; missing ones are estimated
    with :func:`tangent_field`.
    """
    p = check_positive(p, "p")
    N = len(cloud)
    tangents = dict(tangents or {})
    params = {"m": cloud.m, "p": p}
    inner = {"n_random": 0, "n_refine_rounds": 0}

    def tangent(i):
        if i not in tangents:
            tangents.update(tangent_field(cloud, [i]))
        return tangents[i]

    if mode == "exhaustive":
        if N * N > budget:
            raise BudgetError(f"exhaustive tangent-point energy needs {N * N} pairs, "
                              f"budget is {budget}", required=N * N, budget=budget)
        total = 0.0
        for i in range(N):
            inv = _inverse_radius(tangent(i), cloud.points[i], cloud.points)
            total += cloud.weights[i] * float(np.dot(cloud.weights, inv**p))
        return EnergyEstimate(total, None, "exhaustive", N * N, inner, seed, params)
    if mode != "monte_carlo":
        raise DomainError(f"unknown mode {mode!r}")
    n = int(budget)
    if n < 2:
        raise DomainError("monte_carlo needs at least 2 pairs")
    prob = cloud.weights / cloud.total_weight
    rng0 = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    # tangents are fixed before the parallel phase so chunks share nothing mutable
    needed = np.unique(rng0.choice(N, size=min(n, 4 * N), p=prob))
    for i in needed:
        tangent(int(i))
    frozen = dict(tangents)

    def chunk(start, count, rng):
        pairs = rng.choice(N, size=(count, 2), p=prob)
        out = np.empty(count)
        for k, (i, j) in enumerate(pairs):
            T = frozen.get(int(i)) or tangent_field(cloud, [int(i)])[int(i)]
            out[k] = _inverse_radius(T, cloud.points[i], cloud.points[j][None])[0] ** p
        return out

    vals = _chunked(n, seed, chunk, resolve_threads(threads))
    scale = cloud.total_weight**2
    return EnergyEstimate(float(vals.mean() * scale), float(vals.std(ddof=1) / math.sqrt(n) * scale),
                          "monte_carlo", n, inner, seed, params)


# ---------------------------------------------------------------------------
# eta-d balance


def eta_d_lower_bound(eta, d, A, params):
    """``A^l (varsigma_{m+1}(eta) d)^{ml} (3 eta^{m+1} / (4 (m+1)! d))^p``.

    Lower bound for the energy forced by one (eta, d)-voluminous simplex
    on a set whose small balls carry measure at least ``A r^m``.
    """
    m, l, p = params.m, params.l, params.p
    s = varsigma(m + 1, eta)
    log_val = (l * math.log(A) + m * l * math.log(s * d)
               + p * (math.log(3.0) + (m + 1) * math.log(eta)
                      - math.log(4.0 * math.factorial(m + 1) * d)))
    return math.exp(log_val)


def eta_d_check(cloud, energy_bound, params, ahlfors, n_trials, seed=0, eta_min=1e-6):
    """Sample (m+2)-tuples and list those whose (eta, d) contradict the energy bound.

    A tuple with ``eta = h_min / diam`` and ``d = diam <= R`` violates the
    balance when ``eta_d_lower_bound(eta, d, A) > energy_bound``. Returns a
    list of dicts with the tuple indices, eta, d and the forced bound.
    """
    _check_params(cloud, params)
    if params.p <= params.m * params.l:
        raise DomainError(f"need p > m l, got p={params.p}, m l={params.m * params.l}")
    energy_bound = check_positive(energy_bound, "energy_bound")
    A, R = ahlfors
    A = check_positive(A, "A")
    R = check_positive(R, "R")
    m = params.m
    rng = np.random.default_rng(seed)
    N = len(cloud)
    violations = []
    done = 0
    while done < n_trials:
        count = min(20_000, n_trials - done)
        idx = rng.integers(0, N, size=(count, m + 2))
        batch = cloud.points[idx]
        d = simplex_diameters(batch)
        h = min_heights(batch)
        ok = (d > 0) & (d <= R)
        eta = np.zeros(count)
        eta[ok] = h[ok] / d[ok]
        for t in np.flatnonzero(ok & (eta > eta_min) & (eta < 1)):
            bound = eta_d_lower_bound(float(eta[t]), float(d[t]), A, params)
            if bound > energy_bound:
                violations.append({"indices": [int(i) for i in idx[t]], "eta": float(eta[t]),
                                   "d": float(d[t]), "forced_energy": bound})
        done += count
    return violations


def required_diameter(eta, A, energy_bound, params):
    """Smallest diameter an (eta, d)-voluminous simplex may have: the
    balance solved for d, ``d >= (C(eta) A^l / E)^{1/lambda} eta^{(m+1)p/lambda}``."""
    m, l, p = params.m, params.l, params.p
    lam = params.lambda_
    if lam <= 0:
        raise DomainError("need p > m l")
    C = varsigma(m + 1, eta) ** (m * l) * (3.0 / (4.0 * math.factorial(m + 1))) ** p
    return (C * A**l / energy_bound) ** (1.0 / lam) * eta ** ((m + 1) * p / lam)
