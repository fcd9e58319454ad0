"""Volumes, intrinsic volumes and psi-weighted volumes of hull polytopes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .geometry import gnomonic, random_subspaces
from .hull import DegenerateHullError, Polytope, contains, convex_hull
from .sampler import BetaPrimeParams, SeededStream, sample_beta_prime

DENSITIES = ("psi_gnomonic", "constant_one")


@dataclass(frozen=True)
class IntrinsicVolumeEstimate:
    s: int
    value: float
    std_error: float
    method: str  # "exact" or "kubota_mc"
    num_directions: int = 0


@dataclass(frozen=True)
class WeightedVolumeEstimate:
    value: float
    std_error: float
    density_id: str
    method: str = "mc"  # "mc" or "exact"
    num_samples: int = 0


def ball_volume(k: int) -> float:
    """Volume kappa_k of the k-dimensional unit ball."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def kubota_constant(d: int, s: int) -> float:
    """C(d,s) = binom(d,s) kappa_d / (kappa_s kappa_{d-s}), the normalization giving V_d = Vol_d."""
    return math.comb(d, s) * ball_volume(d) / (ball_volume(s) * ball_volume(d - s))


def _fan(poly: Polytope) -> tuple[np.ndarray, np.ndarray]:
    # d-simplices (apex at the vertex centroid) over the boundary subdivision, and their volumes
    c = poly.centroid()
    corners = poly.points[poly.boundary] - c  # (m, d, d)
    vols = np.abs(np.linalg.det(corners)) / math.factorial(poly.dim)
    return corners, vols


def volume(poly: Polytope) -> float:
    """Lebesgue volume by fan triangulation from the vertex centroid."""
    _, vols = _fan(poly)
    return float(np.sum(vols))


def cloud_volume(points: np.ndarray) -> tuple[float, bool]:
    """Volume of the hull of a point cloud and a flag telling whether the cloud was degenerate."""
    try:
        return volume(convex_hull(points)), False
    except DegenerateHullError:
        return 0.0, True


def surface_area(poly: Polytope) -> float:
    """Sum of the (d-1)-volumes of the facets."""
    d = poly.dim
    pts = poly.points[poly.boundary]  # (m, d, d)
    if d == 1:
        return float(len(pts))
    edges = pts[:, 1:, :] - pts[:, :1, :]
    gram = edges @ np.swapaxes(edges, 1, 2)
    dets = np.clip(np.linalg.det(gram), 0.0, None)
    return float(np.sum(np.sqrt(dets)) / math.factorial(d - 1))


def projected_volumes(points: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Vol_s of the hull of ``points`` projected onto each frame (frames shaped ``(N, s, d)``)."""
    proj = np.einsum("md,nsd->nms", points, frames)
    s = frames.shape[1]
    if s == 1:
        return np.ptp(proj[:, :, 0], axis=1)
    out = np.empty(len(frames))
    for i, q in enumerate(proj):
        try:
            out[i] = ConvexHull(q).volume
        except QhullError:
            out[i] = 0.0
    return out


def intrinsic_volume(
    poly: Polytope,
    s: int,
    num_directions: int = 1024,
    stream: SeededStream | None = None,
    force_mc: bool = False,
) -> IntrinsicVolumeEstimate:
    """Intrinsic volume V_s.

    Exact for s in {0, d-1, d}; otherwise a Kubota Monte Carlo average of
    projection volumes over uniform random s-subspaces.
    """
    d = poly.dim
    if not 0 <= s <= d:
        raise ValueError(f"intrinsic volume index must lie in 0..{d}, got {s}")
    if s == 0:
        return IntrinsicVolumeEstimate(0, 1.0, 0.0, "exact")
    if not force_mc:
        if s == d:
            return IntrinsicVolumeEstimate(s, volume(poly), 0.0, "exact")
        if s == d - 1:
            return IntrinsicVolumeEstimate(s, surface_area(poly) / 2.0, 0.0, "exact")
    if stream is None:
        raise ValueError("Monte Carlo intrinsic volumes need a SeededStream")
    if num_directions < 2:
        raise ValueError("need at least two directions for a standard error")
    frames = random_subspaces(stream.generator(), d, s, num_directions)
    vals = projected_volumes(poly.vertex_coords, frames) * kubota_constant(d, s)
    return IntrinsicVolumeEstimate(
        s,
        float(vals.mean()),
        float(vals.std(ddof=1) / math.sqrt(num_directions)),
        "kubota_mc",
        num_directions,
    )


def psi(x: np.ndarray) -> np.ndarray:
    """Gnomonic push-forward density (1 + |x|^2)^(-(d+1)/2) of the spherical measure."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    return (1.0 + np.sum(x * x, axis=-1)) ** (-(d + 1) / 2.0)


def sample_in_polytope(poly: Polytope, rng: np.random.Generator, m: int) -> np.ndarray:
    """Uniform points in the polytope via its fan triangulation."""
    corners, vols = _fan(poly)
    which = rng.choice(len(vols), size=m, p=vols / vols.sum())
    d = poly.dim
    # uniform barycentric weights over the d+1 corners (apex at the origin of ``corners``)
    e = rng.exponential(size=(m, d + 1))
    w = e / e.sum(axis=1, keepdims=True)
    return poly.centroid() + np.einsum("mk,mkd->md", w[:, 1:], corners[which])


def weighted_volume(
    poly: Polytope,
    density_id: str = "psi_gnomonic",
    num_samples: int = 20_000,
    stream: SeededStream | None = None,
) -> WeightedVolumeEstimate:
    """Monte Carlo estimate of the integral of a density over the polytope."""
    if density_id not in DENSITIES:
        raise ValueError(f"unknown density {density_id!r}; choose from {DENSITIES}")
    if stream is None:
        raise ValueError("weighted_volume needs a SeededStream")
    vol = volume(poly)
    x = sample_in_polytope(poly, stream.generator(), num_samples)
    vals = psi(x) if density_id == "psi_gnomonic" else np.ones(num_samples)
    return WeightedVolumeEstimate(
        float(vol * vals.mean()),
        float(vol * vals.std(ddof=1) / math.sqrt(num_samples)),
        density_id,
        "mc",
        num_samples,
    )


def half_sphere_volume(d: int) -> float:
    """Spherical volume of the open upper half of S^d, which is also the integral of psi over R^d."""
    return math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def psi_volume_hit_or_miss(poly: Polytope, num_samples: int = 20_000, stream: SeededStream | None = None) -> WeightedVolumeEstimate:
    """Hit-or-miss estimate of the psi-weighted volume using draws from the normalized psi density.

    Normalized psi is the beta-prime law with beta = (d+1)/2, so the estimate is
    the half-sphere volume times the fraction of draws inside the polytope. The
    variance stays bounded however far the polytope reaches.
    """
    if stream is None:
        raise ValueError("psi_volume_hit_or_miss needs a SeededStream")
    d = poly.dim
    x = sample_beta_prime(BetaPrimeParams(d, (d + 1) / 2), stream, num_samples)
    frac = float(np.mean(contains(poly, x, tol=0.0)))
    total = half_sphere_volume(d)
    return WeightedVolumeEstimate(
        total * frac,
        total * math.sqrt(frac * (1 - frac) / num_samples),
        "psi_gnomonic",
        "sphere_mc",
        num_samples,
    )


def _spherical_polygon_area(ring: np.ndarray) -> float:
    # fan of spherical triangles from the normalized vertex sum; each triangle
    # contributes its solid angle (Van Oosterom-Strackee)
    c = ring.sum(axis=0)
    c /= np.linalg.norm(c)
    a = ring
    b = np.roll(ring, -1, axis=0)
    triple = np.abs(np.einsum("ij,ij->i", np.broadcast_to(c, a.shape), np.cross(a, b)))
    denom = 1.0 + a @ c + np.einsum("ij,ij->i", a, b) + b @ c
    return float(np.sum(2.0 * np.arctan2(triple, denom)))


def psi_volume_exact(poly: Polytope, sphere_points: np.ndarray | None = None) -> float:
    """Exact psi-weighted volume for d <= 2, i.e. the spherical volume of the gnomonic preimage.

    ``sphere_points`` may supply the half-sphere preimages of ``poly.points``
    (preferred for accuracy when the hull reaches far out).
    """
    d = poly.dim
    if d == 1:
        lo, hi = (float(poly.points[v, 0]) for v in poly.vertices)
        return abs(math.atan(hi) - math.atan(lo))
    if d != 2:
        raise ValueError("closed-form psi-volume is only implemented for d <= 2")
    ring_idx = poly.boundary[:, 0]
    if sphere_points is None:
        from .geometry import gnomonic_inverse

        ring = gnomonic_inverse(poly.points[ring_idx])
    else:
        ring = np.asarray(sphere_points, dtype=float)[ring_idx]
    return _spherical_polygon_area(ring)


def spherical_volume(
    spherical_points: np.ndarray,
    num_samples: int = 20_000,
    stream: SeededStream | None = None,
    method: str = "auto",
) -> WeightedVolumeEstimate:
    """Spherical volume of the spherical hull of points on the open upper half-sphere.

    The points are projected gnomonically and the Euclidean hull is measured
    with the density psi. ``method="auto"`` uses the closed form for d <= 2 and
    hit-or-miss sampling from the normalized psi density otherwise; ``"mc"``
    samples uniformly inside the projected hull.
    """
    pts = np.asarray(spherical_points, dtype=float)
    if np.any(pts[:, -1] <= 0):
        raise ValueError("all points must lie on the open upper half-sphere (x_{d+1} > 0)")
    poly = convex_hull(gnomonic(pts))
    if method not in ("auto", "exact", "mc", "sphere_mc"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" or (method == "auto" and poly.dim <= 2):
        return WeightedVolumeEstimate(psi_volume_exact(poly, pts), 0.0, "psi_gnomonic", "exact")
    if method == "mc":
        return weighted_volume(poly, "psi_gnomonic", num_samples, stream)
    return psi_volume_hit_or_miss(poly, num_samples, stream)
