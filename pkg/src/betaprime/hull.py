"""Convex hulls in R^d with facet lattice, f-vectors and membership queries.

Dimension 1 and 2 are handled directly (the planar case is Andrew's monotone
chain over an exact orientation predicate); d >= 3 uses Qhull through
``scipy.spatial.ConvexHull`` and merges coplanar simplicial pieces into facets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .geometry import check_orthonormal

EPS = np.finfo(float).eps
# Shewchuk's a-priori error bound for the 2x2 orientation determinant
_CCW_ERRBOUND = (3.0 + 16.0 * EPS) * EPS


class HullError(RuntimeError):
    pass


class DegenerateHullError(HullError):
    """Input points do not affinely span R^d."""

    def __init__(self, rank: int, d: int):
        super().__init__(f"point cloud is degenerate: affine rank {rank} < dimension {d}")
        self.rank = rank
        self.d = d


def _exact_det(rows) -> Fraction:
    m = [[Fraction(float(v)) for v in row] for row in rows]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] * inv
            if f:
                for c in range(col, n):
                    m[r][c] -= f * m[col][c]
    return det


def _exact_rank(rows) -> int:
    m = [[Fraction(float(v)) for v in row] for row in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(rank + 1, len(m)):
            f = m[r][col] / m[rank][col]
            if f:
                for c in range(col, ncols):
                    m[r][c] -= f * m[rank][c]
        rank += 1
    return rank


def _spans_hyperplane(q: np.ndarray) -> bool:
    # d points in R^d spanning a (d-1)-flat, decided exactly
    return _exact_rank(q[1:] - q[0]) == q.shape[1] - 1


def orient2d(a, b, c) -> int:
    """Sign of the turn a -> b -> c: +1 counter-clockwise, -1 clockwise, 0 collinear."""
    left = (b[0] - a[0]) * (c[1] - a[1])
    right = (b[1] - a[1]) * (c[0] - a[0])
    det = left - right
    bound = _CCW_ERRBOUND * (abs(left) + abs(right))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    # the differences above were rounded too; redo everything exactly
    ax, ay, bx, by, cx, cy = (Fraction(float(v)) for v in (a[0], a[1], b[0], b[1], c[0], c[1]))
    e = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (e > 0) - (e < 0)


def orient(points) -> int:
    """Sign of det[p_1 - p_0, ..., p_d - p_0] for ``d + 1`` points in R^d.

    A float determinant is trusted only when it clears a scale-aware error
    threshold; otherwise the sign is recomputed in exact rational arithmetic.
    """
    p = np.asarray(points, dtype=float)
    d = p.shape[1]
    if p.shape[0] != d + 1:
        raise ValueError("orient needs d + 1 points in R^d")
    if d == 2:
        return orient2d(p[0], p[1], p[2])
    diff = p[1:] - p[0]
    det = np.linalg.det(diff)
    scale = np.prod(np.linalg.norm(p[1:], axis=1) + np.linalg.norm(p[0]))
    if abs(det) > 8.0 * d * d * EPS * scale:
        return 1 if det > 0 else -1
    rows = [[Fraction(float(x)) - Fraction(float(x0)) for x, x0 in zip(row, p[0])] for row in p[1:]]
    e = _exact_det(rows)
    return (e > 0) - (e < 0)


@dataclass(frozen=True)
class Facet:
    vertices: tuple[int, ...]
    normal: np.ndarray
    offset: float


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a point cloud.

    ``facets`` carry outward unit normals with ``<normal, x> <= offset`` inside;
    ``ridges`` are pairs of facet indices; ``boundary`` is a simplicial
    subdivision of the boundary (rows of ``d`` cloud indices).
    """

    points: np.ndarray
    vertices: tuple[int, ...]
    facets: tuple[Facet, ...]
    ridges: tuple[tuple[int, int], ...]
    boundary: np.ndarray
    f: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def vertex_coords(self) -> np.ndarray:
        return self.points[list(self.vertices)]

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.facets])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.facets])

    def centroid(self) -> np.ndarray:
        return self.vertex_coords.mean(axis=0)


def euler_characteristic(f) -> int:
    return sum((-1) ** k * fk for k, fk in enumerate(f))


def euler_holds(f, d: int) -> bool:
    return euler_characteristic(f) == 1 - (-1) ** d


def affine_rank(points: np.ndarray, rtol: float = 1e-12) -> int:
    p = np.asarray(points, dtype=float)
    if len(p) < 2:
        return 0
    sv = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def _check_cloud(points) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.ndim != 2:
        raise ValueError("point cloud must be a 2-D array")
    if not np.all(np.isfinite(p)):
        raise ValueError("point cloud contains non-finite coordinates")
    return p


def _hull_1d(p: np.ndarray) -> Polytope:
    x = p[:, 0]
    lo, hi = int(np.argmin(x)), int(np.argmax(x))
    if x[lo] == x[hi]:
        raise DegenerateHullError(0, 1)
    facets = (
        Facet((lo,), np.array([-1.0]), -float(x[lo])),
        Facet((hi,), np.array([1.0]), float(x[hi])),
    )
    return Polytope(p, tuple(sorted((lo, hi))), facets, ((0, 1),), np.array([[lo], [hi]]), (2,))


def _akl_toussaint_keep(p: np.ndarray) -> np.ndarray:
    # discard points strictly inside the octagon of extreme points (certified in floats)
    dirs = np.array([[1, 0], [0, 1], [1, 1], [1, -1]], dtype=float)
    proj = p @ dirs.T
    ext = np.unique(np.concatenate([np.argmin(proj, axis=0), np.argmax(proj, axis=0)]))
    poly = _monotone_chain(p, ext)
    keep = np.ones(len(p), dtype=bool)
    if len(poly) < 3:
        return keep
    inside = np.ones(len(p), dtype=bool)
    norms = np.linalg.norm(p, axis=1)
    for i in range(len(poly)):
        a, b = p[poly[i]], p[poly[(i + 1) % len(poly)]]
        e = b - a
        rel = p - a
        cross = e[0] * rel[:, 1] - e[1] * rel[:, 0]
        slack = 16.0 * EPS * np.linalg.norm(e) * (np.linalg.norm(rel, axis=1) + norms + np.linalg.norm(a))
        inside &= cross > slack
    keep[inside] = False
    return keep


def _monotone_chain(p: np.ndarray, idx) -> list[int]:
    idx = sorted(set(int(i) for i in idx), key=lambda i: (p[i, 0], p[i, 1], i))
    # drop exact duplicates, keeping the smallest index
    uniq = []
    for i in idx:
        if uniq and p[uniq[-1], 0] == p[i, 0] and p[uniq[-1], 1] == p[i, 1]:
            continue
        uniq.append(i)
    if len(uniq) < 3:
        return uniq

    def half(seq):
        chain: list[int] = []
        for i in seq:
            while len(chain) >= 2 and orient2d(p[chain[-2]], p[chain[-1]], p[i]) <= 0:
                chain.pop()
            chain.append(i)
        return chain

    lower = half(uniq)
    upper = half(reversed(uniq))
    return lower[:-1] + upper[:-1]


def _hull_2d(p: np.ndarray) -> Polytope:
    keep = np.flatnonzero(_akl_toussaint_keep(p))
    ring = _monotone_chain(p, keep)
    if len(ring) < 3:
        raise DegenerateHullError(affine_rank(p[ring]) if ring else 0, 2)
    m = len(ring)
    facets = []
    for i in range(m):
        a, b = ring[i], ring[(i + 1) % m]
        e = p[b] - p[a]
        normal = np.array([e[1], -e[0]]) / math.hypot(e[0], e[1])
        offset = max(float(normal @ p[a]), float(normal @ p[b]))
        facets.append(Facet((a, b), normal, offset))
    ridges = tuple(tuple(sorted(((i - 1) % m, i))) for i in range(m))
    boundary = np.array([[ring[i], ring[(i + 1) % m]] for i in range(m)])
    return Polytope(p, tuple(sorted(ring)), tuple(facets), ridges, boundary, (m, m))


def _hull_nd(p: np.ndarray) -> Polytope:
    d = p.shape[1]
    rank = affine_rank(p)
    if rank < d:
        raise DegenerateHullError(rank, d)
    try:
        qh = ConvexHull(p)
    except QhullError as exc:
        raise DegenerateHullError(affine_rank(p, 1e-9), d) from exc
    simplices = qh.simplices
    eqs = qh.equations
    nbrs = qh.neighbors
    ns = len(simplices)

    parent = list(range(ns))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(ns):
        for k in range(d):
            j = int(nbrs[i, k])
            if j < i or find(i) == find(j):
                continue
            same_plane = np.array_equal(eqs[i], eqs[j])
            if not same_plane:
                opposite = (set(simplices[j]) - set(simplices[i])).pop()
                same_plane = (
                    orient(np.vstack([p[simplices[i]], p[opposite]])) == 0
                    # zero-volume simplices from triangulated facets would chain unrelated facets
                    and _spans_hyperplane(p[simplices[i]])
                    and _spans_hyperplane(p[simplices[j]])
                )
            if same_plane:
                parent[find(j)] = find(i)

    groups: dict[int, list[int]] = {}
    for i in range(ns):
        groups.setdefault(find(i), []).append(i)
    roots = sorted(groups, key=lambda g: min(groups[g]))
    gid = {g: n for n, g in enumerate(roots)}
    facets = []
    for g in roots:
        members = groups[g]
        verts = tuple(sorted({int(v) for s in members for v in simplices[s]}))
        eq = eqs[members[0]]
        normal = eq[:-1] / np.linalg.norm(eq[:-1])
        offset = float(np.max(p[list(verts)] @ normal))
        facets.append(Facet(verts, normal, offset))
    ridge_set = set()
    for i in range(ns):
        for j in nbrs[i]:
            a, b = gid[find(i)], gid[find(int(j))]
            if a != b:
                ridge_set.add((min(a, b), max(a, b)))
    vertices = tuple(sorted({v for f in facets for v in f.vertices}))
    ridges = tuple(sorted(ridge_set))
    f = _count_faces(p, vertices, facets, ridges)
    return Polytope(p, vertices, tuple(facets), ridges, simplices.copy(), f)


def _count_faces(p, vertices, facets, ridges) -> tuple[int, ...]:
    d = p.shape[1]
    counts = [0] * d
    counts[0] = len(vertices)
    counts[d - 1] = len(facets)
    counts[d - 2] = len(ridges)
    if d <= 3:
        return tuple(counts)
    vsets = [frozenset(f.vertices) for f in facets]
    if all(len(s) == d for s in vsets):
        # simplicial: every proper subset of a facet is a face
        for k in range(1, d - 2):
            counts[k] = len({c for s in vsets for c in combinations(sorted(s), k + 1)})
        return tuple(counts)
    # faces are exactly the nonempty intersections of facets
    faces = set(vsets)
    frontier = set(vsets)
    while frontier:
        new = set()
        for a in frontier:
            for b in vsets:
                c = a & b
                if c and c != a and c not in faces:
                    new.add(c)
        faces |= new
        frontier = new
    by_dim: dict[int, int] = {}
    for face in faces:
        k = affine_rank(p[sorted(face)], 1e-9)
        by_dim[k] = by_dim.get(k, 0) + 1
    for k in range(1, d - 2):
        counts[k] = by_dim.get(k, 0)
    return tuple(counts)


def convex_hull(points) -> Polytope:
    """Convex hull of a full-dimensional point cloud given as an ``(n, d)`` array.

    Raises :class:`DegenerateHullError` (carrying the affine rank) when the
    points do not span R^d.
    """
    p = _check_cloud(points)
    n, d = p.shape
    if n < d + 1:
        raise DegenerateHullError(min(n - 1, d), d)
    if d == 1:
        poly = _hull_1d(p)
    elif d == 2:
        poly = _hull_2d(p)
    else:
        poly = _hull_nd(p)
    if not euler_holds(poly.f, d):
        raise HullError(f"Euler-Poincare relation fails for f-vector {poly.f}")
    return poly


def f_vector(poly: Polytope) -> tuple[int, ...]:
    return poly.f


def scale_tol(poly: Polytope, rel: float = 1e-9) -> float:
    return rel * (1.0 + float(np.max(np.abs(poly.points))))


def contains(poly: Polytope, x, tol: float = 1e-9) -> np.ndarray | bool:
    """Whether ``x`` (a point or rows of points) satisfies every facet inequality within ``tol``."""
    x = np.asarray(x, dtype=float)
    slack = x @ poly.normals.T - poly.offsets
    inside = np.all(slack <= tol, axis=-1)
    return bool(inside) if inside.ndim == 0 else inside


def project_hull(poly_or_cloud, basis) -> np.ndarray:
    """Coordinates of the vertices (or cloud points) in an orthonormal basis of an s-subspace."""
    b = check_orthonormal(basis)
    if isinstance(poly_or_cloud, Polytope):
        pts = poly_or_cloud.vertex_coords
    else:
        pts = _check_cloud(poly_or_cloud)
    if pts.shape[1] != b.shape[1]:
        raise ValueError("basis dimension does not match the cloud")
    return pts @ b.T


def _ordered_facet_ring(poly: Polytope, facet: Facet) -> list[int]:
    pts = poly.points[list(facet.vertices)]
    c = pts.mean(axis=0)
    u = pts[0] - c
    u = u - (u @ facet.normal) * facet.normal
    u /= np.linalg.norm(u)
    w = np.cross(facet.normal, u)
    ang = np.arctan2((pts - c) @ w, (pts - c) @ u)
    return [facet.vertices[i] for i in np.argsort(ang, kind="stable")]


def write_off(poly: Polytope, path: str | Path) -> None:
    """Write a 3-D polytope in OFF format (vertices renumbered, faces counter-clockwise from outside)."""
    if poly.dim != 3:
        raise ValueError("OFF export is only available for d = 3")
    renum = {v: i for i, v in enumerate(poly.vertices)}
    lines = ["OFF", f"{poly.f[0]} {poly.f[2]} {poly.f[1]}"]
    for v in poly.vertices:
        lines.append(" ".join(f"{c:.17g}" for c in poly.points[v]))
    for facet in poly.facets:
        ring = _ordered_facet_ring(poly, facet)
        lines.append(" ".join([str(len(ring))] + [str(renum[v]) for v in ring]))
    Path(path).write_text("\n".join(lines) + "\n")
