"""Executable version of the distant-simplex construction behind the variance lower bound.

Everything is placed along the ray through ``y = r e_1`` with
``r = n^(1/(2 beta - d))``: the simplex ``Delta`` with apex ``y^0`` and base a
regular (d-1)-simplex around ``y``, its small homothets ``Delta^j``, the
separating half-spaces ``H^{j+}``, the circular cones around ``y - y^0`` and the
regions R_1, R_2, G inside ``Delta^0``. Monte Carlo routines estimate the
quantities whose orders of magnitude drive the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CircularCone, HalfSpace, _meets, polar_cone, random_subspaces
from .hull import convex_hull, contains as hull_contains
from .measures import kubota_constant, projected_volumes
from .sampler import BetaPrimeParams, SeededStream, sample_beta_prime, sample_beta_prime_restricted


class ConstructionError(RuntimeError):
    """A built object violates one of its defining contact/exclusion conditions."""


@dataclass(frozen=True)
class ConstructionParams:
    model: BetaPrimeParams
    n: int
    c1: float = 0.5
    c2: float = 0.5
    c3: float | None = None  # defaults to 1/(2d)

    def __post_init__(self):
        d = self.model.d
        if d < 2:
            raise ValueError("the construction needs d >= 2")
        if self.c3 is None:
            object.__setattr__(self, "c3", 1.0 / (2 * d))
        if not 0 < self.c1 < 1:
            raise ValueError(f"constraint violated: 0 < c1 < 1 (got c1={self.c1})")
        if not 0 < self.c2 < 1:
            raise ValueError(f"constraint violated: 0 < c2 < 1 (got c2={self.c2})")
        if not 0 < self.c3 < 1 / d:
            raise ValueError(f"constraint violated: 0 < c3 < 1/d (got c3={self.c3}, 1/d={1 / d:.6g})")
        if int(self.n) != self.n or self.n < d + 1:
            raise ValueError(f"constraint violated: n >= d + 1 (got n={self.n})")


class Simplex:
    """A full-dimensional simplex with barycentric membership tests."""

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        d = self.vertices.shape[1]
        if self.vertices.shape[0] != d + 1:
            raise ValueError("a d-simplex needs d + 1 vertices")
        self._edges = (self.vertices[1:] - self.vertices[0]).T
        self._inv = np.linalg.inv(self._edges)
        self.scale = float(np.max(np.abs(self.vertices)))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def volume(self) -> float:
        return abs(np.linalg.det(self._edges)) / math.factorial(self.dim)

    def barycentric(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lam = (x - self.vertices[0]) @ self._inv.T
        return np.column_stack([1.0 - lam.sum(axis=1), lam])

    def contains(self, x, rtol: float = 1e-9) -> np.ndarray:
        return np.all(self.barycentric(x) >= -rtol, axis=1)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def sample_uniform(self, rng: np.random.Generator, m: int) -> np.ndarray:
        e = rng.exponential(size=(m, self.dim + 1))
        return (e / e.sum(axis=1, keepdims=True)) @ self.vertices


def regular_simplex(k: int, circumradius: float) -> np.ndarray:
    """Vertices of a regular simplex with ``k`` vertices in R^(k-1), centred at 0.

    The first vertex points along the first coordinate axis.
    """
    if k < 2:
        raise ValueError("need at least two vertices")
    v = np.eye(k) - 1.0 / k
    q, rr = np.linalg.qr(v[:, : k - 1])
    q = q * np.sign(np.diag(rr))
    coords = v @ q
    return coords * (circumradius / np.linalg.norm(coords[0]))


@dataclass(frozen=True, eq=False)
class Construction:
    params: ConstructionParams
    r: float
    y: np.ndarray
    apexes: np.ndarray  # rows y^0, ..., y^d
    delta: Simplex
    delta_j: tuple[Simplex, ...]
    H: tuple[HalfSpace, ...]  # H[j-1] is H^{j+} for j = 1..d
    D_outer: CircularCone  # C(y - y^0, atan(c2/c1)); the base sits at depth c1 r below y^0
    D_inner: CircularCone  # C(y - y^0, atan(c2/(c1 (d-1)))), from the inradius of the base
    w: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    facet_distance: float
    contacts: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.params.model.d

    @property
    def z0_ref(self) -> np.ndarray:
        """Reference point of Delta^0 fixing the cones D_z^1, D_z^2 (its centroid)."""
        return self.delta_j[0].centroid

    def dz1(self, z0=None) -> CircularCone:
        z0 = self.z0_ref if z0 is None else np.asarray(z0, dtype=float)
        p = self.params
        return CircularCone(self.y - z0, math.atan(p.c2 * (1 - 2 * p.c3) / (self.d - 1)))

    def dz2(self, z0=None) -> CircularCone:
        z0 = self.z0_ref if z0 is None else np.asarray(z0, dtype=float)
        p = self.params
        return CircularCone(self.y - z0, math.atan(p.c2 / (1 - 2 * p.c3)))

    def in_D(self, v) -> np.ndarray:
        """Membership of vectors in the polyhedral cone pos{y^j - y^0}."""
        gens = (self.apexes[1:] - self.apexes[0]).T
        lam = np.atleast_2d(np.asarray(v, dtype=float)) @ np.linalg.inv(gens).T
        return np.all(lam >= -1e-12 * np.abs(lam).max(axis=1, keepdims=True), axis=1)

    def in_R1(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.dz2().contains(self.w1 - x) & self.delta_j[0].contains(x)

    def in_R2(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.dz2().contains(x - self.w2) & self.delta_j[0].contains(x)

    def g_eps1(self) -> np.ndarray:
        """The unit vector used for G: the axis of the polar cone of D_z^2."""
        return polar_cone(self.dz2()).axis

    def in_G(self, x, eps1=None) -> np.ndarray:
        x = np.atleast_2d(x)
        e = self.g_eps1() if eps1 is None else np.asarray(eps1, dtype=float)
        return (x @ e >= self.w2 @ e) & self.dz2().contains(x - self.w1)

    def union_region(self, x) -> np.ndarray:
        """Membership in the union of the H^{k+} and H^+(e_1, r)."""
        x = np.atleast_2d(x)
        hit = x[:, 0] >= self.r
        for h in self.H:
            hit |= h.contains(x)
        return hit

    def scaled(self, factor: float) -> "Construction":
        """Copy with every coordinate multiplied by ``factor`` (r included)."""
        f = float(factor)
        return Construction(
            params=self.params,
            r=self.r * f,
            y=self.y * f,
            apexes=self.apexes * f,
            delta=Simplex(self.delta.vertices * f),
            delta_j=tuple(Simplex(s.vertices * f) for s in self.delta_j),
            H=tuple(HalfSpace(h.u, h.r * f) for h in self.H),
            D_outer=self.D_outer,
            D_inner=self.D_inner,
            w=self.w * f,
            w1=self.w1 * f,
            w2=self.w2 * f,
            facet_distance=self.facet_distance * f,
            contacts={k: v * f for k, v in self.contacts.items()},
        )

    def to_dict(self) -> dict:
        p = self.params
        return {
            "d": self.d,
            "beta": p.model.beta,
            "n": p.n,
            "c1": p.c1,
            "c2": p.c2,
            "c3": p.c3,
            "r": self.r,
            "y": self.y.tolist(),
            "apexes": self.apexes.tolist(),
            "delta_j": [s.vertices.tolist() for s in self.delta_j],
            "H": [{"j": j + 1, "u": h.u.tolist(), "offset": h.r} for j, h in enumerate(self.H)],
            "D_outer": {"axis": self.D_outer.axis.tolist(), "half_angle": self.D_outer.half_angle},
            "D_inner": {"axis": self.D_inner.axis.tolist(), "half_angle": self.D_inner.half_angle},
            "Dz1_half_angle": self.dz1().half_angle,
            "Dz2_half_angle": self.dz2().half_angle,
            "w": self.w.tolist(),
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
            "facet_distance": self.facet_distance,
            "facet_distance_over_r": self.facet_distance / self.r,
        }


def facet_distance_closed_form(c1: float, c2: float, d: int, r: float) -> float:
    """Distance from the origin to the hyperplane of a facet of Delta through y^0."""
    return c2 * (1 + c1) / math.sqrt(c2 * c2 + c1 * c1 * (d - 1) ** 2) * r


def _hyperplane_through(points: np.ndarray) -> tuple[np.ndarray, float]:
    diffs = points[1:] - points[0]
    _, _, vt = np.linalg.svd(diffs)
    u = vt[-1]
    return u, float(u @ points[0])


def _separating_halfspace(j: int, apexes: np.ndarray, c3: float, small: list[Simplex]) -> tuple[HalfSpace, np.ndarray]:
    d = apexes.shape[1]
    others = [k for k in range(1, d + 1) if k != j]
    # contact faces: the face of Delta^0 cut off towards the other apexes, and
    # the tips of Delta^k pointing at y^j
    base_pts = np.array([apexes[0] + c3 * (apexes[k] - apexes[0]) for k in others])
    tips = np.array([apexes[k] + c3 * (apexes[j] - apexes[k]) for k in others])
    u, t = _hyperplane_through(np.vstack([base_pts, tips[:1]]))
    if small[others[0]].centroid @ u < t:
        u, t = -u, -t
    h = HalfSpace(u, t)

    scale = float(np.max(np.abs(apexes)))
    tol = 1e-9 * scale
    if np.max(np.abs(tips @ u - t)) > tol:
        raise ConstructionError(f"H^{j}: tips of Delta^k (k != 0, {j}) are not coplanar with the Delta^0 contact face")
    for k in others:
        if np.any(small[k].vertices @ u < t - tol):
            raise ConstructionError(f"H^{j}+ does not contain Delta^{k}")
    for k in (0, j):
        if np.any(small[k].vertices @ u > t + tol):
            raise ConstructionError(f"H^{j}+ meets the interior of Delta^{k}")
    for k in [0] + others:
        if np.min(np.abs(small[k].vertices @ u - t)) > tol:
            raise ConstructionError(f"H^{j} does not touch the boundary of Delta^{k}")
    if not t > 0:
        raise ConstructionError(f"H^{j}+ contains the origin")
    return h, np.vstack([base_pts, tips])


def build(params: ConstructionParams) -> Construction:
    """Build all deterministic geometry for the given model, n and constants."""
    d = params.model.d
    c1, c2, c3 = params.c1, params.c2, params.c3
    r = params.n ** (1.0 / params.model.dof)
    e1 = np.eye(d)[0]
    y = r * e1
    apexes = np.zeros((d + 1, d))
    apexes[0] = (1 + c1) * r * e1
    apexes[1:, 0] = r
    apexes[1:, 1:] = regular_simplex(d, c2 * r)

    delta = Simplex(apexes)
    small = [Simplex(apexes[j] + c3 * (apexes - apexes[j])) for j in range(d + 1)]
    halfspaces = []
    contacts = {}
    for j in range(1, d + 1):
        h, pts = _separating_halfspace(j, apexes, c3, small)
        halfspaces.append(h)
        contacts[f"H{j}"] = pts

    axis = y - apexes[0]
    w = (1 + c1 * (1 - c3)) * r * e1
    return Construction(
        params=params,
        r=r,
        y=y,
        apexes=apexes,
        delta=delta,
        delta_j=tuple(small),
        H=tuple(halfspaces),
        D_outer=CircularCone(axis, math.atan(c2 / c1)),
        D_inner=CircularCone(axis, math.atan(c2 / (c1 * (d - 1)))),
        w=w,
        w1=(2 * apexes[0] + w) / 3,
        w2=(apexes[0] + 2 * w) / 3,
        facet_distance=facet_distance_closed_form(c1, c2, d, r),
        contacts=contacts,
    )


def facet_distance_numeric(cons: Construction, j: int) -> float:
    """Distance from the origin to aff{y^k : k != j}, computed directly."""
    pts = np.delete(cons.apexes, j, axis=0)
    _, t = _hyperplane_through(pts)
    return abs(t)


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    std_error: float
    num_samples: int
    density_ratio: float = float("nan")  # max/min density over the samples


def simplex_probability(cons: Construction, j: int, num_samples: int, stream: SeededStream) -> ProbabilityEstimate:
    """Beta-prime mass of Delta^j: volume times the mean density at uniform points."""
    simplex = cons.delta_j[j]
    x = simplex.sample_uniform(stream.generator(), num_samples)
    f = cons.params.model.density(x)
    vol = simplex.volume
    return ProbabilityEstimate(
        float(vol * f.mean()),
        float(vol * f.std(ddof=1) / math.sqrt(num_samples)),
        num_samples,
        float(f.max() / f.min()),
    )


def event_A_indicator(points, cons: Construction) -> bool:
    """Exactly one point in each Delta^j and no further points in the union of the far half-spaces."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != cons.d:
        raise ValueError("point dimension does not match the construction")
    in_union = cons.union_region(x)
    cand = x[in_union]
    if len(cand) != cons.d + 1:
        return False
    for s in cons.delta_j:
        if int(np.count_nonzero(s.contains(cand, rtol=0.0))) != 1:
            return False
    return True


def falling_factorial(n: int, k: int) -> int:
    return math.perm(n, k)


def event_probability_from_cells(n: int, cell_probs, union_prob: float) -> float:
    """P(one point in each disjoint cell, no other point in the union) for n i.i.d. points.

    Exact multinomial identity: ``n!/(n-m)! * prod(p_j) * (1 - q)^(n-m)`` with
    ``m`` cells contained in a union of mass ``q``.
    """
    p = np.asarray(cell_probs, dtype=float)
    m = len(p)
    if n < m:
        return 0.0
    log_val = (
        math.lgamma(n + 1) - math.lgamma(n - m + 1) + float(np.sum(np.log(p))) + (n - m) * math.log1p(-union_prob)
    )
    return math.exp(log_val)


def binomial_bound_reference(n: int, d: int) -> float:
    """C(n, d+1) (1/n)^(d+1) (1 - 1/n)^(n-d-1), the reference lower-bound shape."""
    return math.comb(n, d + 1) * n ** -(d + 1) * (1 - 1 / n) ** (n - d - 1)


def wilson_interval(k: int, m: int, z: float = 1.96) -> tuple[float, float]:
    phat = k / m
    denom = 1 + z * z / m
    centre = (phat + z * z / (2 * m)) / denom
    half = z * math.sqrt(phat * (1 - phat) / m + z * z / (4 * m * m)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class EventAEstimate:
    direct: float
    direct_ci: tuple[float, float]
    replications: int
    factorized: float
    factorized_se: float
    cell_probs: tuple[float, ...]
    union_prob: float


def event_A_probability(
    params: ConstructionParams,
    num_replications: int,
    stream: SeededStream,
    num_cell_samples: int = 20_000,
    num_union_samples: int = 1_000_000,
) -> EventAEstimate:
    """Estimate P(A) two ways.

    ``direct`` is the fraction of replications (n fresh points each) realizing
    A, with a Wilson interval. ``factorized`` plugs Monte Carlo estimates of the
    cell masses P(Delta^j) and of the union mass into the exact multinomial
    identity; it stays informative when A is far too rare to observe directly.
    """
    cons = build(params)
    model = params.model
    hits = 0
    for i in range(num_replications):
        pts = sample_beta_prime(model, stream.substream(0, i), params.n)
        hits += event_A_indicator(pts, cons)

    cells = [simplex_probability(cons, j, num_cell_samples, stream.substream(1, j)) for j in range(cons.d + 1)]
    u_pts = sample_beta_prime(model, stream.substream(2), num_union_samples)
    q = float(np.mean(cons.union_region(u_pts)))
    q_se = math.sqrt(q * (1 - q) / num_union_samples)
    m = cons.d + 1
    val = event_probability_from_cells(params.n, [c.value for c in cells], q)
    rel_var = sum((c.std_error / c.value) ** 2 for c in cells) + ((params.n - m) * q_se / (1 - q)) ** 2
    return EventAEstimate(
        direct=hits / num_replications,
        direct_ci=wilson_interval(hits, num_replications),
        replications=num_replications,
        factorized=val,
        factorized_se=val * math.sqrt(rel_var),
        cell_probs=tuple(c.value for c in cells),
        union_prob=q,
    )


def _check_membership(z0, z_pts, cons: Construction) -> tuple[np.ndarray, np.ndarray]:
    z0 = np.asarray(z0, dtype=float)
    z_pts = np.atleast_2d(np.asarray(z_pts, dtype=float))
    if z_pts.shape != (cons.d, cons.d):
        raise ValueError("need one point in each of Delta^1..Delta^d")
    if not cons.delta_j[0].contains(z0)[0]:
        raise ValueError("z0 must lie in Delta^0")
    for j in range(cons.d):
        if not cons.delta_j[j + 1].contains(z_pts[j])[0]:
            raise ValueError(f"z_pts[{j}] must lie in Delta^{j + 1}")
    return z0, z_pts


def _v_tilde_many(z0s: np.ndarray, z_pts: np.ndarray, cons: Construction, s: int, frames) -> np.ndarray:
    d = cons.d
    if s == d:
        # G(d, d) is the single subspace R^d, which always meets the polar cone
        edges = z_pts[None, :, :] - z0s[:, None, :]
        return np.abs(np.linalg.det(edges)) / math.factorial(d)
    hit = _meets(frames, polar_cone(cons.dz2()))
    used = frames[hit]
    c = kubota_constant(d, s)
    out = np.empty(len(z0s))
    for i, z0 in enumerate(z0s):
        vals = projected_volumes(np.vstack([z0, z_pts]), used) if len(used) else np.zeros(0)
        out[i] = c * vals.sum() / len(frames)
    return out


def v_tilde(
    z0,
    z_pts,
    cons: Construction,
    s: int,
    num_subspaces: int = 1024,
    stream: SeededStream | None = None,
    frames: np.ndarray | None = None,
) -> float:
    """Monte Carlo value of the restricted Kubota functional at ``z0``.

    Averages ``1{L meets polar(D_z^2)} Vol_s([z0, F] | L)`` over uniform random
    s-subspaces L and scales by the Kubota constant. Pass ``frames`` to reuse a
    fixed subspace sample across calls.
    """
    z0, z_pts = _check_membership(z0, z_pts, cons)
    if not 1 <= s <= cons.d:
        raise ValueError(f"s must lie in 1..{cons.d}")
    if s < cons.d and frames is None:
        if stream is None:
            raise ValueError("v_tilde needs a stream or explicit frames when s < d")
        frames = random_subspaces(stream.generator(), cons.d, s, num_subspaces)
    return float(_v_tilde_many(z0[None, :], z_pts, cons, s, frames)[0])


@dataclass(frozen=True)
class ConditionalVarianceResult:
    r: float
    s: int
    variance: float
    variance_se: float
    ratio: float  # variance / r^(2s)
    frac_R1: float
    frac_R2: float
    overlap_R1_R2: int
    nu_meet: float  # fraction of sampled subspaces meeting the polar cone
    num_outer: int
    mean_gap: float  # mean v_tilde over R1 samples minus mean over R2 samples


def jackknife_variance_se(values: np.ndarray) -> float:
    """Delete-one jackknife standard error of the unbiased sample variance."""
    x = np.asarray(values, dtype=float)
    m = len(x)
    c = x - x.mean()
    s2 = np.sum(c * c)
    # leave-one-out variances in closed form
    loo = (s2 - c * c * m / (m - 1)) / (m - 2)
    return float(math.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2)))


def conditional_variance(
    params: ConstructionParams,
    s: int,
    num_outer: int,
    num_subspaces: int,
    stream: SeededStream,
) -> ConditionalVarianceResult:
    """Variance of the restricted functional at a beta-prime point conditioned on Delta^0.

    The far points z^1..z^d sit at the centroids of Delta^1..Delta^d; one fixed
    sample of subspaces is shared by all draws of Z.
    """
    cons = build(params)
    d = cons.d
    z_pts = np.array([cons.delta_j[j].centroid for j in range(1, d + 1)])
    frames = random_subspaces(stream.substream(0).generator(), d, s, num_subspaces) if s < d else None
    region = cons.delta_j[0]
    z = sample_beta_prime_restricted(params.model, region.contains, region.bbox(), stream.substream(1), num_outer)
    vals = _v_tilde_many(z, z_pts, cons, s, frames)
    in1 = cons.in_R1(z)
    in2 = cons.in_R2(z)
    var = float(np.var(vals, ddof=1))
    gap = float(vals[in1].mean() - vals[in2].mean()) if in1.any() and in2.any() else float("nan")
    nu = 1.0 if frames is None else float(np.mean(_meets(frames, polar_cone(cons.dz2()))))
    return ConditionalVarianceResult(
        r=cons.r,
        s=s,
        variance=var,
        variance_se=jackknife_variance_se(vals),
        ratio=var / cons.r ** (2 * s),
        frac_R1=float(in1.mean()),
        frac_R2=float(in2.mean()),
        overlap_R1_R2=int(np.count_nonzero(in1 & in2)),
        nu_meet=nu,
        num_outer=num_outer,
        mean_gap=gap,
    )


def sample_G(cons: Construction, rng: np.random.Generator, m: int) -> np.ndarray:
    """Uniform points of G = H_eps1^+ cap (w1 + D_z^2) for the constructed eps1."""
    e = cons.g_eps1()
    cone = cons.dz2()
    depth = float((cons.w1 - cons.w2) @ e)
    radius = depth * math.tan(cone.half_angle) / max(abs(float(e @ cone.axis)), 1e-12) + depth
    lo, hi = cons.w1 - radius, cons.w1 + radius
    out = []
    got = 0
    while got < m:
        x = lo + (hi - lo) * rng.random((8 * m, cons.d))
        x = x[cons.in_G(x)]
        out.append(x)
        got += len(x)
    return np.concatenate(out)[:m]


def sample_region(cons: Construction, which: str, rng: np.random.Generator, m: int) -> np.ndarray:
    """Uniform points of R1 or R2 (rejection from Delta^0)."""
    test = {"R1": cons.in_R1, "R2": cons.in_R2}[which]
    out = []
    got = 0
    while got < m:
        x = cons.delta_j[0].sample_uniform(rng, 8 * m)
        x = x[test(x)]
        out.append(x)
        got += len(x)
    return np.concatenate(out)[:m]


def nested_hull_fraction(cons: Construction, rng: np.random.Generator, pairs: int) -> float:
    """Fraction of random pairs Z1 in R1, Z2 in R2 with Z2 inside [Z1, F]."""
    d = cons.d
    z_pts = np.array([cons.delta_j[j].centroid for j in range(1, d + 1)])
    z1 = sample_region(cons, "R1", rng, pairs)
    z2 = sample_region(cons, "R2", rng, pairs)
    # barycentric coordinates of z2 in the simplex [z1, F], batched over pairs
    edges = np.swapaxes(z_pts[None, :, :] - z1[:, None, :], 1, 2)  # (pairs, d, d)
    lam = np.linalg.solve(edges, (z2 - z1)[:, :, None])[:, :, 0]
    inside = np.all(lam >= -1e-12, axis=1) & (lam.sum(axis=1) <= 1 + 1e-12)
    return float(np.mean(inside))


def hull_contains_check(cons: Construction, z1, z2) -> bool:
    """Whether [z2, F] is contained in [z1, F] (F at the Delta^j centroids), via hull membership."""
    d = cons.d
    z_pts = np.array([cons.delta_j[j].centroid for j in range(1, d + 1)])
    outer = convex_hull(np.vstack([z1, z_pts]))
    return bool(np.all(hull_contains(outer, np.vstack([z2, z_pts]), tol=1e-9 * cons.r)))


@dataclass(frozen=True)
class MembershipReport:
    """Violation counts of the geometric claims, each tested on random samples."""

    num_samples: int
    cone_sandwich: int  # rays in D_inner but not in D, or in D but not in D_outer
    separation: int  # centroid/interior-point failures of the H^{j+} conditions
    simplex_overlap: int  # points of one Delta^j inside another
    r1_r2_overlap: int
    g_outside_delta0: int
    nested_failures: int
    rays_in_inner: int  # how many sampled rays exercised the inner cone

    @property
    def all_pass(self) -> bool:
        return (
            self.cone_sandwich == 0
            and self.separation == 0
            and self.simplex_overlap == 0
            and self.r1_r2_overlap == 0
            and self.g_outside_delta0 == 0
            and self.nested_failures == 0
        )


def _random_rays(rng: np.random.Generator, axis: np.ndarray, max_angle: float, m: int) -> np.ndarray:
    d = len(axis)
    a = axis / np.linalg.norm(axis)
    g = rng.standard_normal((m, d))
    g -= np.outer(g @ a, a)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    t = rng.uniform(0.0, max_angle, m)
    return np.outer(np.cos(t), a) + np.sin(t)[:, None] * g


def membership_checks(cons: Construction, stream: SeededStream, num_samples: int = 10_000) -> MembershipReport:
    """Sample-based checks of the cone sandwich, separation, disjointness and region containments."""
    d = cons.d
    rng = stream.generator()
    rays = _random_rays(rng, cons.D_outer.axis, 1.5 * cons.D_outer.half_angle, num_samples)
    inner = cons.D_inner.contains(rays)
    in_d = cons.in_D(rays)
    outer = cons.D_outer.contains(rays)
    sandwich = int(np.count_nonzero(inner & ~in_d) + np.count_nonzero(in_d & ~outer))

    tol = 1e-9 * cons.r
    per = max(num_samples // (d + 1), 1)
    interior = [s.sample_uniform(rng, per) for s in cons.delta_j]
    sep = 0
    for j, h in enumerate(cons.H, start=1):
        for k in range(1, d + 1):
            if k != j and not h.contains(cons.delta_j[k].centroid[None, :])[0]:
                sep += 1
        for k in (0, j):
            pts = np.vstack([cons.delta_j[k].centroid, interior[k]])
            sep += int(np.count_nonzero(pts @ h.u > h.r + tol))

    overlap = 0
    for j, pts in enumerate(interior):
        for k, other in enumerate(cons.delta_j):
            if k != j:
                overlap += int(np.count_nonzero(other.contains(pts, rtol=0.0)))

    z = cons.delta_j[0].sample_uniform(rng, num_samples)
    r12 = int(np.count_nonzero(cons.in_R1(z) & cons.in_R2(z)))
    g_pts = sample_G(cons, rng, num_samples)
    g_out = int(np.count_nonzero(~cons.delta_j[0].contains(g_pts)))
    nested = num_samples - round(nested_hull_fraction(cons, rng, num_samples) * num_samples)
    return MembershipReport(num_samples, sandwich, sep, overlap, r12, g_out, nested, int(inner.sum()))


def construction_diagnostics(
    params: ConstructionParams,
    s: int,
    stream: SeededStream,
    reps: int = 1000,
    num_cell_samples: int = 20_000,
    num_outer: int = 4000,
    num_subspaces: int = 256,
    num_membership: int = 10_000,
) -> dict:
    """All scalar diagnostics of one construction: masses, event A, conditional variance, membership."""
    cons = build(params)
    d = cons.d
    n = params.n
    cells = [simplex_probability(cons, j, num_cell_samples, stream.substream(0, j)) for j in range(d + 1)]
    ev = event_A_probability(params, reps, stream.substream(1), num_cell_samples)
    cv = conditional_variance(params, s, num_outer, num_subspaces, stream.substream(2))
    mem = membership_checks(cons, stream.substream(3), num_membership)
    numeric = [facet_distance_numeric(cons, j) for j in range(1, d + 1)]
    return {
        "n": n,
        "r": cons.r,
        "facet_distance_closed_form": cons.facet_distance,
        "facet_distance_numeric": numeric,
        "n_p_delta": [n * c.value for c in cells],
        "n_p_delta_se": [n * c.std_error for c in cells],
        "density_ratio": [c.density_ratio for c in cells],
        "p_A_direct": ev.direct,
        "p_A_direct_ci": list(ev.direct_ci),
        "p_A_factorized": ev.factorized,
        "p_A_factorized_se": ev.factorized_se,
        "p_A_reference_shape": binomial_bound_reference(n, d),
        "union_mass": ev.union_prob,
        "var_ratio": cv.ratio,
        "var_ratio_se": cv.variance_se / cons.r ** (2 * s),
        "frac_R1": cv.frac_R1,
        "frac_R2": cv.frac_R2,
        "mean_gap_over_r_s": cv.mean_gap / cons.r**s,
        "nu_meet": cv.nu_meet,
        "membership": {
            "num_samples": mem.num_samples,
            "cone_sandwich": mem.cone_sandwich,
            "separation": mem.separation,
            "simplex_overlap": mem.simplex_overlap,
            "r1_r2_overlap": mem.r1_r2_overlap + cv.overlap_R1_R2,
            "g_outside_delta0": mem.g_outside_delta0,
            "nested_failures": mem.nested_failures,
        },
    }
