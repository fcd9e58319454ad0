"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np


def incomplete_beta_quad(z: float, a: float, b: float, dps: int = 30) -> float:
    """B(z; a, b) by tanh-sinh quadrature in extended precision.

    The substitution t = u^(1/a) removes the t^(a-1) endpoint singularity,
    which otherwise costs several digits when a is small.
    """
    with mpmath.workdps(dps):
        a_, b_ = mpmath.mpf(a), mpmath.mpf(b)
        f = lambda u: (1 - u ** (1 / a_)) ** (b_ - 1) / a_  # noqa: E731
        return float(mpmath.quad(f, [0, mpmath.mpf(z) ** a_]))


def tail_quad(h: float, gamma: float) -> float:
    with mpmath.workdps(30):
        return float(mpmath.quad(lambda x: (1 + x * x) ** (-gamma), [h, mpmath.inf]))


def brute_force_facets(points: np.ndarray, rtol: float = 1e-10) -> set[frozenset[int]]:
    """Facets of a simplicial hull: d-subsets whose hyperplane leaves every point on one side."""
    n, d = points.shape
    scale = 1.0 + np.abs(points).max()
    facets = set()
    for sub in itertools.combinations(range(n), d):
        p = points[list(sub)]
        diffs = p[1:] - p[0]
        # normal = generalized cross product via cofactors
        normal = np.array([(-1) ** i * np.linalg.det(np.delete(diffs, i, axis=1)) for i in range(d)])
        nrm = np.linalg.norm(normal)
        if nrm == 0:
            continue
        normal /= nrm
        side = (points - p[0]) @ normal
        tol = rtol * scale
        if np.all(side <= tol) or np.all(side >= -tol):
            facets.add(frozenset(sub))
    return facets


def f_vector_from_simplicial_facets(facets: set[frozenset[int]], d: int) -> tuple[int, ...]:
    """Faces of a simplicial polytope are the subsets of its facets."""
    out = []
    for k in range(d):
        faces = set()
        for f in facets:
            faces.update(frozenset(c) for c in itertools.combinations(sorted(f), k + 1))
        out.append(len(faces))
    return tuple(out)


def hit_or_miss_volume(inside, lo, hi, rng: np.random.Generator, m: int) -> tuple[float, float]:
    """Volume of {inside} within the box [lo, hi] and its binomial standard error."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x = lo + (hi - lo) * rng.random((m, len(lo)))
    p = float(np.mean(inside(x)))
    box = float(np.prod(hi - lo))
    return box * p, box * math.sqrt(p * (1 - p) / m)


def triangle_psi_integral(tri: np.ndarray) -> float:
    """Integral of (1+|x|^2)^(-3/2) over a triangle by 2-D quadrature."""
    a, b, c = (np.asarray(v, dtype=float) for v in tri)
    e1, e2 = b - a, c - a
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])

    def g(u, v):
        x = a + u * (b - a) + v * (c - a)
        return (1 + x @ x) ** -1.5

    with mpmath.workdps(20):
        val = mpmath.quad(lambda u: mpmath.quad(lambda v: g(float(u), float(v)), [0, 1 - u]), [0, 1])
    return float(val) * jac
