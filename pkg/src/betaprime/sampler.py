"""Seeded samplers for the beta-prime law on R^d and the x_{d+1}^alpha law on the half-sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .geometry import gnomonic_inverse
from .specfn import log_gamma


@dataclass(frozen=True)
class BetaPrimeParams:
    d: int
    beta: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.d}")
        if not self.beta > self.d / 2:
            raise ValueError(f"beta-prime law needs beta > d/2, got beta={self.beta} with d={self.d}")

    @property
    def dof(self) -> float:
        """Chi-square degrees of freedom 2*beta - d of the scale mixture."""
        return 2.0 * self.beta - self.d

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        sq = np.sum(x * x, axis=-1)
        return normalization_constant(self) * (1.0 + sq) ** (-self.beta)


@dataclass(frozen=True)
class SphericalParams:
    d: int
    alpha: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"sphere dimension must be an integer >= 2, got {self.d}")
        if not self.alpha > -1:
            raise ValueError(f"half-sphere law needs alpha > -1, got {self.alpha}")

    @property
    def outside_stated_range(self) -> bool:
        # the half-sphere results are stated for d > 2
        return self.d <= 2

    def to_beta_prime(self) -> BetaPrimeParams:
        """Beta-prime parameters of the gnomonic image, beta = (d + 1 + alpha) / 2."""
        return BetaPrimeParams(self.d, (self.d + 1 + self.alpha) / 2.0)


@dataclass(frozen=True)
class SeededStream:
    """Reproducible random stream keyed by ``(master_seed, stream_index, path)``.

    Backed by numpy's PCG64 seeded through ``SeedSequence(master_seed,
    spawn_key=(stream_index, *path))``; distinct keys give independent streams.
    """

    master_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.master_seed < 0 or self.stream_index < 0:
            raise ValueError("seeds and stream indices must be non-negative")

    def substream(self, *keys: int) -> "SeededStream":
        return SeededStream(self.master_seed, self.stream_index, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, *self.path))
        return np.random.Generator(np.random.PCG64(seq))


class DegenerateRegionError(RuntimeError):
    pass


def normalization_constant(p: BetaPrimeParams) -> float:
    """Density constant Gamma(beta) / (pi^(d/2) Gamma(beta - d/2))."""
    return math.exp(log_gamma(p.beta) - 0.5 * p.d * math.log(math.pi) - log_gamma(p.beta - 0.5 * p.d))


def hemisphere_normalization(p: SphericalParams) -> float:
    """Constant making ``c * x_{d+1}^alpha`` a probability density on the open half-sphere."""
    area_sd1 = 2.0 * math.pi ** (p.d / 2) / math.gamma(p.d / 2)
    # polar angle theta from the pole: x_{d+1} = cos(theta)
    val, _ = integrate.quad(lambda t: np.cos(t) ** p.alpha * np.sin(t) ** (p.d - 1), 0.0, math.pi / 2)
    return 1.0 / (area_sd1 * val)


def _draw_beta_prime(rng: np.random.Generator, p: BetaPrimeParams, n: int) -> np.ndarray:
    # Z / sqrt(W) with Z ~ N(0, I_d), W ~ chi2(2 beta - d) has density prop. to (1 + |x|^2)^(-beta)
    z = rng.standard_normal((n, p.d))
    w = rng.chisquare(p.dof, n)
    return z / np.sqrt(w)[:, None]


def sample_beta_prime(p: BetaPrimeParams, stream: SeededStream, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. beta-prime points, shape ``(n, d)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _draw_beta_prime(stream.generator(), p, n)


def sample_hemisphere(p: SphericalParams, stream: SeededStream, n: int) -> np.ndarray:
    """Draw ``n`` points with density proportional to ``x_{d+1}^alpha`` on the open upper half-sphere.

    Sampled as the inverse gnomonic image of beta-prime points with
    ``beta = (d + 1 + alpha) / 2``. Returns shape ``(n, d + 1)``.
    """
    x = sample_beta_prime(p.to_beta_prime(), stream, n)
    return gnomonic_inverse(x)


def sample_hemisphere_direct(p: SphericalParams, stream: SeededStream, n: int) -> np.ndarray:
    """Same law as :func:`sample_hemisphere`, drawn on the sphere without the gnomonic map.

    The squared height ``x_{d+1}^2`` is Beta((alpha+1)/2, d/2) distributed and
    the horizontal direction is uniform on S^{d-1}.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream.generator()
    u = rng.beta((p.alpha + 1) / 2.0, p.d / 2.0, n)
    g = rng.standard_normal((n, p.d))
    g /= np.linalg.norm(g, axis=1)[:, None]
    out = np.empty((n, p.d + 1))
    out[:, :-1] = g * np.sqrt(1.0 - u)[:, None]
    out[:, -1] = np.sqrt(u)
    return out


def sample_beta_prime_restricted(
    p: BetaPrimeParams,
    region: Callable[[np.ndarray], np.ndarray],
    box: tuple[np.ndarray, np.ndarray],
    stream: SeededStream,
    n: int,
    batch: int = 4096,
    max_trials: int = 10_000_000,
) -> np.ndarray:
    """Draw ``n`` beta-prime points conditioned on a region, by rejection from a bounding box.

    ``region`` maps an ``(m, d)`` array to a boolean mask. Proposals are uniform
    in ``box = (lo, hi)`` and kept with probability density/max-density-on-box.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if lo.shape != (p.d,) or hi.shape != (p.d,) or np.any(hi <= lo):
        raise ValueError("box must be a pair of d-vectors with lo < hi")
    closest = np.clip(0.0, lo, hi)
    log_fmax = -p.beta * math.log1p(float(closest @ closest))

    rng = stream.generator()
    out = []
    accepted = 0
    trials = 0
    while accepted < n:
        if trials >= max_trials:
            rate = accepted / trials
            raise DegenerateRegionError(
                f"acceptance rate {rate:.3g} after {trials} proposals; region looks degenerate"
            )
        x = lo + (hi - lo) * rng.random((batch, p.d))
        u = rng.random(batch)
        log_f = -p.beta * np.log1p(np.sum(x * x, axis=1))
        keep = (np.log(u) < log_f - log_fmax) & np.asarray(region(x), dtype=bool)
        trials += batch
        if keep.any():
            out.append(x[keep])
            accepted += int(keep.sum())
        if trials >= max_trials // 10 and accepted < 1e-6 * trials:
            raise DegenerateRegionError(
                f"acceptance rate below 1e-6 after {trials} proposals; region looks degenerate"
            )
    return np.concatenate(out)[:n]


def write_points_csv(path: str | Path, points: np.ndarray) -> None:
    """Write a point cloud as CSV with header ``x1,...,xk`` and 17 significant digits."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    header = ",".join(f"x{i + 1}" for i in range(points.shape[1]))
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in points:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_points_csv(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or any(not h.startswith("x") for h in header):
            raise ValueError(f"{path}: expected a header of the form x1,...,xd")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
