"""Gnomonic projection, half-space probabilities and circular cones."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .specfn import Cdf1dParams, betaprime_sf_1d

if TYPE_CHECKING:
    from .sampler import BetaPrimeParams

UNIT_TOL = 1e-12


class DegenerateConeError(ValueError):
    pass


def _unit(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError(f"{name} must be nonzero")
    return v / nrm


def gnomonic(x: np.ndarray) -> np.ndarray:
    """Central projection of the open upper half-sphere onto the tangent plane at the pole.

    Accepts a single point of shape ``(d+1,)`` or an array ``(m, d+1)``.
    """
    x = np.asarray(x, dtype=float)
    last = x[..., -1]
    if np.any(last <= 0):
        raise ValueError("gnomonic projection needs x_{d+1} > 0")
    norms = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise ValueError("gnomonic projection needs unit vectors")
    return x[..., :-1] / last[..., None]


def gnomonic_inverse(y: np.ndarray) -> np.ndarray:
    """Map points of R^d back to the open upper half-sphere: ``(y, 1) / sqrt(1 + |y|^2)``."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("gnomonic_inverse needs finite input")
    ones = np.ones(y.shape[:-1] + (1,))
    lifted = np.concatenate([y, ones], axis=-1)
    # hypot-style scaling keeps huge |y| from overflowing
    return lifted / np.linalg.norm(lifted, axis=-1, keepdims=True)


@dataclass(frozen=True)
class HalfSpace:
    """The half-space ``{x : <u, x> >= r}``."""

    u: np.ndarray
    r: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
            raise ValueError("half-space normal must be a unit vector")
        object.__setattr__(self, "u", u)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.u >= self.r - tol


def halfspace_probability(p: "BetaPrimeParams", r: float) -> float:
    """Beta-prime mass of a half-space at signed distance ``r`` from the origin.

    The projection of a d-dimensional beta-prime point onto a unit vector is
    1-D beta-prime with parameter ``beta - (d-1)/2``.
    """
    return betaprime_sf_1d(r, Cdf1dParams(p.beta - (p.d - 1) / 2.0))


@dataclass(frozen=True)
class CircularCone:
    """Closed circular cone with the given axis and half-angle."""

    axis: np.ndarray
    half_angle: float

    def __post_init__(self):
        axis = _unit(self.axis, "cone axis")
        if not 0.0 <= self.half_angle <= math.pi / 2:
            raise ValueError(f"half-angle must lie in [0, pi/2], got {self.half_angle}")
        object.__setattr__(self, "axis", axis)

    @property
    def dim(self) -> int:
        return self.axis.shape[0]

    def contains(self, v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Membership of vectors (rows of ``v``); the apex is included."""
        v = np.asarray(v, dtype=float)
        nrm = np.linalg.norm(v, axis=-1)
        along = v @ self.axis
        return along >= math.cos(self.half_angle) * nrm - tol * np.maximum(nrm, 1.0)


def polar_cone(c: CircularCone) -> CircularCone:
    if not 0.0 < c.half_angle < math.pi / 2:
        raise DegenerateConeError("polar of a ray or a half-space is not a proper circular cone")
    return CircularCone(-c.axis, math.pi / 2 - c.half_angle)


def check_orthonormal(basis: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Return ``basis`` as an ``(s, d)`` array after checking its rows are orthonormal."""
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    if b.shape[0] > b.shape[1]:
        raise ValueError("basis has more vectors than the ambient dimension")
    if np.max(np.abs(b @ b.T - np.eye(b.shape[0]))) > tol:
        raise ValueError("basis is not orthonormal")
    return b


def subspace_meets_cone(basis: np.ndarray, c: CircularCone) -> bool:
    """Whether the span of ``basis`` contains a nonzero vector of the closed cone ``c``."""
    b = check_orthonormal(basis)
    return bool(_meets(b[None, :, :], c)[0])


def _meets(bases: np.ndarray, c: CircularCone, tol: float = 1e-12) -> np.ndarray:
    # bases: (N, s, d). The span meets the cone iff the angle between the axis and
    # its projection onto the span is at most the half-angle; tangency counts.
    proj_len = np.linalg.norm(bases @ c.axis, axis=-1)
    return proj_len >= math.cos(c.half_angle) - tol


def random_subspaces(rng: np.random.Generator, d: int, s: int, count: int) -> np.ndarray:
    """Uniform random s-dimensional subspaces as orthonormal row frames, shape ``(count, s, d)``."""
    g = rng.standard_normal((count, d, s))
    q, rr = np.linalg.qr(g)
    # sign fix makes the frame a deterministic function of the Gaussian draw
    signs = np.sign(np.diagonal(rr, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    q = q * signs[:, None, :]
    return np.swapaxes(q, 1, 2)
