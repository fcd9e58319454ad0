"""Replication engine, variance estimation and log-log scaling fits."""

from __future__ import annotations

import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import gnomonic
from .hull import DegenerateHullError, convex_hull
from .measures import intrinsic_volume, psi_volume_exact, psi_volume_hit_or_miss
from .sampler import (
    BetaPrimeParams,
    SeededStream,
    SphericalParams,
    sample_beta_prime,
    sample_hemisphere,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

MODEL_KINDS = ("beta_prime", "hemisphere")
FUNCTIONAL_KINDS = ("intrinsic_volume", "f_vector", "spherical_volume", "weighted_volume")
WEIGHTED_MC_SAMPLES = 20_000
MIN_REPLICATIONS = 30
RETRY_FLAG = 1 << 31
DEFAULT_SE_CEILING = 0.25


class ConfigError(ValueError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    d: int
    beta: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        try:
            if self.kind == "beta_prime":
                if self.beta is None:
                    raise ConfigError("model.beta is required for the beta_prime model")
                BetaPrimeParams(self.d, self.beta)
            else:
                if self.alpha is None:
                    raise ConfigError("model.alpha is required for the hemisphere model")
                SphericalParams(self.d, self.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def beta_prime(self) -> BetaPrimeParams:
        """Beta-prime law of the Euclidean points (the gnomonic image for the half-sphere)."""
        if self.kind == "beta_prime":
            return BetaPrimeParams(self.d, self.beta)
        return SphericalParams(self.d, self.alpha).to_beta_prime()


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str
    index: int | None = None

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ConfigError(f"functional.kind must be one of {FUNCTIONAL_KINDS}, got {self.kind!r}")
        if self.kind in ("intrinsic_volume", "f_vector") and self.index is None:
            raise ConfigError(f"functional.index is required for {self.kind}")

    @property
    def label(self) -> str:
        return f"{self.kind}({self.index})" if self.index is not None else self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    functional: FunctionalSpec
    n_grid: tuple[int, ...]
    replications: int
    master_seed: int
    kubota_directions: int = 1024
    output_path: str | None = None

    def __post_init__(self):
        d = self.model.d
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid:
            raise ConfigError("n_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if grid[0] < d + 1:
            raise ConfigError(f"every n must be at least d + 1 = {d + 1}")
        if self.replications < MIN_REPLICATIONS:
            raise ConfigError(f"replications must be >= {MIN_REPLICATIONS}")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if self.kubota_directions < 2:
            raise ConfigError("kubota_directions must be >= 2")
        f = self.functional
        if f.kind == "intrinsic_volume" and not 0 <= f.index <= d:
            raise ConfigError(f"intrinsic volume index must lie in 0..{d}")
        if f.kind == "f_vector" and not 0 <= f.index <= d - 1:
            raise ConfigError(f"f-vector index must lie in 0..{d - 1}")
        if f.kind == "spherical_volume" and self.model.kind != "hemisphere":
            raise ConfigError("spherical_volume needs model.kind = hemisphere")

    @property
    def reference_exponent(self) -> float:
        """Exponent of n in the variance lower bound for the configured functional."""
        bp = self.model.beta_prime
        if self.functional.kind == "intrinsic_volume":
            return 2 * self.functional.index / bp.dof
        if self.functional.kind == "f_vector":
            return 0.0
        return -2.0 / bp.dof

    @property
    def moment_warnings(self) -> list[str]:
        out = []
        f = self.functional
        if f.kind == "intrinsic_volume" and f.index > 0 and not self.model.beta_prime.dof > 2 * f.index:
            out.append(
                f"heavy-tail: variance may be infinite (2*beta - d = {self.model.beta_prime.dof:g} "
                f"is not > 2s = {2 * f.index})"
            )
        if self.model.kind == "hemisphere" and SphericalParams(self.model.d, self.model.alpha).outside_stated_range:
            out.append("half-sphere model with d = 2 lies outside the stated range d > 2")
        return out

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        allowed_top = {"model", "functional", "n_grid", "replications", "master_seed", "kubota_directions", "output_path"}
        unknown = set(data) - allowed_top
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            m = dict(data["model"])
            fn = dict(data.get("functional", {}))
            bad = set(m) - {"kind", "d", "beta", "alpha"}
            bad |= {f"functional.{k}" for k in set(fn) - {"kind", "index"}}
            if bad:
                raise ConfigError(f"unknown config keys: {sorted(bad)}")
            model = ModelSpec(m["kind"], int(m["d"]), m.get("beta"), m.get("alpha"))
            functional = FunctionalSpec(fn["kind"], fn.get("index"))
            return cls(
                model=model,
                functional=functional,
                n_grid=tuple(data["n_grid"]),
                replications=int(data["replications"]),
                master_seed=int(data["master_seed"]),
                kubota_directions=int(data.get("kubota_directions", 1024)),
                output_path=data.get("output_path"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc.args[0]}") from exc

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        """Read a config file; TOML syntax errors propagate with line and column."""
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_mapping(data)


def stream_index(n: int, replication: int) -> int:
    """Deterministic stream index for replication ``replication`` at sample size ``n``."""
    return (n << 32) | replication


def _cloud(cfg: ExperimentConfig, stream: SeededStream, n: int) -> tuple[np.ndarray, np.ndarray | None]:
    if cfg.model.kind == "hemisphere":
        sph = sample_hemisphere(SphericalParams(cfg.model.d, cfg.model.alpha), stream, n)
        return gnomonic(sph), sph
    return sample_beta_prime(cfg.model.beta_prime, stream, n), None


def evaluate_functional(cfg: ExperimentConfig, stream: SeededStream, n: int) -> float:
    """Draw one cloud of ``n`` points, build its hull and evaluate the configured functional."""
    pts, sph = _cloud(cfg, stream, n)
    poly = convex_hull(pts)
    f = cfg.functional
    if f.kind == "f_vector":
        return float(poly.f[f.index])
    if f.kind == "intrinsic_volume":
        return intrinsic_volume(poly, f.index, cfg.kubota_directions, stream.substream(1)).value
    if poly.dim <= 2:
        return psi_volume_exact(poly, sph)
    return psi_volume_hit_or_miss(poly, WEIGHTED_MC_SAMPLES, stream.substream(1)).value


def _run_block(cfg: ExperimentConfig, n: int, reps: range) -> tuple[list[float], list[int]]:
    values, retried = [], []
    for rep in reps:
        stream = SeededStream(cfg.master_seed, stream_index(n, rep))
        try:
            values.append(evaluate_functional(cfg, stream, n))
        except DegenerateHullError as exc:
            log.warning("degenerate hull at n=%d rep=%d (%s); retrying on flagged stream", n, rep, exc)
            retried.append(rep)
            flagged = SeededStream(cfg.master_seed, stream_index(n, rep) | RETRY_FLAG)
            values.append(evaluate_functional(cfg, flagged, n))
    return values, retried


@dataclass
class ReplicationResult:
    values: dict[int, np.ndarray]
    retried: list[tuple[int, int]] = field(default_factory=list)


def run_replications(cfg: ExperimentConfig, workers: int = 1, chunk: int = 50) -> ReplicationResult:
    """Evaluate the functional for every (n, replication); deterministic for a fixed master seed."""
    blocks = [(n, range(a, min(a + chunk, cfg.replications))) for n in cfg.n_grid for a in range(0, cfg.replications, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_block, [cfg] * len(blocks), [b[0] for b in blocks], [b[1] for b in blocks]))
    else:
        outs = [_run_block(cfg, n, reps) for n, reps in blocks]
    values: dict[int, list[float]] = {n: [] for n in cfg.n_grid}
    retried = []
    for (n, reps), (vals, rt) in zip(blocks, outs):
        values[n].extend(vals)
        retried.extend((n, r) for r in rt)
    return ReplicationResult({n: np.array(v) for n, v in values.items()}, retried)


@dataclass(frozen=True)
class VarianceEstimate:
    n: int
    mean: float
    variance: float
    variance_std_error: float
    replications: int


def _exact_integer_variance(values: np.ndarray) -> float | None:
    if not np.all(values == np.round(values)) or np.max(np.abs(values)) > 2**40:
        return None
    ints = [int(v) for v in values]
    m = len(ints)
    s = sum(ints)
    q = sum(v * v for v in ints)
    return (m * q - s * s) / (m * (m - 1))


def estimate_variance_one(n: int, values) -> VarianceEstimate:
    """Unbiased sample variance with a delete-one jackknife standard error."""
    x = np.asarray(values, dtype=float)
    m = len(x)
    if m < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} values, got {m}")
    var = _exact_integer_variance(x)
    if var is None:
        var = float(np.var(x, ddof=1))
    c = x - x.mean()
    s2 = float(np.sum(c * c))
    loo = (s2 - c * c * m / (m - 1)) / (m - 2)
    se = math.sqrt((m - 1) / m * float(np.sum((loo - loo.mean()) ** 2)))
    return VarianceEstimate(n, float(x.mean()), var, se, m)


def estimate_variance(values_by_n: dict[int, np.ndarray]) -> list[VarianceEstimate]:
    return [estimate_variance_one(n, values_by_n[n]) for n in sorted(values_by_n)]


@dataclass(frozen=True)
class ScalingFit:
    functional: str
    exponent_reference: float
    fitted_slope: float
    slope_std_error: float
    intercept: float
    per_n: tuple[VarianceEstimate, ...]
    excluded: tuple[int, ...] = ()


def fit_scaling(estimates, exponent_reference: float, functional: str = "") -> ScalingFit:
    """Weighted least-squares slope of log(variance) against log(n).

    Weights come from the jackknife errors through the delta method
    (sd of log var ~ se/var). The slope error uses the residual-scaled
    covariance, so an exact power law yields zero error.
    """
    estimates = list(estimates)
    usable = [e for e in estimates if e.variance > 0]
    excluded = tuple(e.n for e in estimates if e.variance <= 0)
    if excluded:
        warnings.warn(f"nonpositive variance at n={list(excluded)}; excluded from the fit", stacklevel=2)
    if len(usable) < 4:
        raise FitError(f"need at least 4 grid points with positive variance, have {len(usable)}")
    x = np.log([e.n for e in usable])
    yv = np.log([e.variance for e in usable])
    sd = np.array([e.variance_std_error / e.variance for e in usable])
    if np.all(sd > 0):
        w = 1.0 / sd**2
    else:
        w = np.ones_like(x)
    X = np.column_stack([np.ones_like(x), x])
    xtw = X.T * w
    cov_unscaled = np.linalg.inv(xtw @ X)
    coef = cov_unscaled @ (xtw @ yv)
    resid = yv - X @ coef
    dof = len(x) - 2
    scale = float(np.sum(w * resid**2) / dof)
    slope_se = math.sqrt(max(scale * cov_unscaled[1, 1], 0.0))
    return ScalingFit(functional, exponent_reference, float(coef[1]), slope_se, float(coef[0]), tuple(estimates), excluded)


@dataclass(frozen=True)
class Verdict:
    verdict: str  # consistent | inconsistent | inconclusive
    conjecture_compatible: bool


def lower_bound_verdict(fit: ScalingFit, se_ceiling: float = DEFAULT_SE_CEILING) -> Verdict:
    """Compare a fitted slope with the lower-bound exponent.

    ``consistent`` when slope + 3 se reaches the reference exponent,
    ``inconclusive`` when the slope error exceeds ``se_ceiling``. The two-sided
    conjecture is compatible when |slope - reference| <= 3 se.
    """
    slope, se, ref = fit.fitted_slope, fit.slope_std_error, fit.exponent_reference
    conj = abs(slope - ref) <= 3 * se
    if se > se_ceiling:
        return Verdict("inconclusive", conj)
    return Verdict("consistent" if slope + 3 * se >= ref else "inconsistent", conj)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replications: ReplicationResult
    estimates: list[VarianceEstimate]
    fit: ScalingFit | None
    verdict: Verdict | None
    notes: list[str]


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    notes = list(cfg.moment_warnings)
    reps = run_replications(cfg, workers)
    if reps.retried:
        notes.append(f"{len(reps.retried)} replication(s) retried after a degenerate hull")
    estimates = estimate_variance(reps.values)
    fit = verdict = None
    try:
        fit = fit_scaling(estimates, cfg.reference_exponent, cfg.functional.label)
        verdict = lower_bound_verdict(fit)
    except FitError as exc:
        notes.append(f"fit unavailable: {exc}")
    return ExperimentResult(cfg, reps, estimates, fit, verdict, notes)


def _g(x: float) -> str:
    return f"{x:.17g}"


def write_outputs(result: ExperimentResult, outdir: str | Path) -> dict[str, Path]:
    """Write raw.csv, summary.csv and fit.json into ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    raw = out / "raw.csv"
    with open(raw, "w", newline="\n") as fh:
        fh.write("n,replication,value\n")
        for n in sorted(result.replications.values):
            for i, v in enumerate(result.replications.values[n]):
                fh.write(f"{n},{i},{_g(v)}\n")
    summary = out / "summary.csv"
    with open(summary, "w", newline="\n") as fh:
        fh.write("n,mean,variance,variance_se,reps\n")
        for e in result.estimates:
            fh.write(f"{e.n},{_g(e.mean)},{_g(e.variance)},{_g(e.variance_std_error)},{e.replications}\n")
    paths = {"raw": raw, "summary": summary}
    if result.fit is not None:
        report = {
            "functional": result.fit.functional,
            "reference_exponent": result.fit.exponent_reference,
            "slope": result.fit.fitted_slope,
            "slope_se": result.fit.slope_std_error,
            "verdict": result.verdict.verdict,
            "conjecture_compatible": result.verdict.conjecture_compatible,
        }
        fit_path = out / "fit.json"
        fit_path.write_text(json.dumps(report, indent=2) + "\n")
        paths["fit"] = fit_path
    return paths
