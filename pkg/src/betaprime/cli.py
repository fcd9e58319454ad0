"""Command-line front end: sampling, hull statistics, numeric checks and variance scans.

Exit codes: 0 success, 1 a check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from . import construction as cn
from .experiments import ConfigError, ExperimentConfig, ExperimentResult, run_experiment, write_outputs
from .geometry import gnomonic, halfspace_probability
from .hull import DegenerateHullError, convex_hull, euler_holds, write_off
from .measures import intrinsic_volume, spherical_volume, surface_area, volume
from .sampler import (
    BetaPrimeParams,
    SeededStream,
    SphericalParams,
    read_points_csv,
    sample_beta_prime,
    sample_hemisphere,
    sample_hemisphere_direct,
    write_points_csv,
)
from .specfn import tail_integral, tail_series_factor

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SVG_SALT = "betaprime"


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def dumps17(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps17(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps17(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps17(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return "null"
        return f"{x:.17g}"
    if obj is None:
        return "null"
    return json.dumps(obj)


# --- sample -----------------------------------------------------------------


def cmd_sample(args, parser) -> int:
    try:
        if args.model == "beta_prime":
            if args.beta is None:
                parser.error("--beta is required for --model beta_prime")
            pts = sample_beta_prime(BetaPrimeParams(args.d, args.beta), SeededStream(args.seed), args.n)
        else:
            if args.alpha is None:
                parser.error("--alpha is required for --model hemisphere")
            pts = sample_hemisphere(SphericalParams(args.d, args.alpha), SeededStream(args.seed), args.n)
    except ValueError as exc:
        parser.error(str(exc))
    write_points_csv(args.out, pts)
    print(f"wrote {len(pts)} points of dimension {pts.shape[1]} to {args.out}")
    return EXIT_OK


# --- hull-stats -------------------------------------------------------------


def cmd_hull_stats(args, parser) -> int:
    try:
        pts = read_points_csv(args.input)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read {args.input}: {exc}")
    sph = None
    if args.spherical:
        sph = pts
        pts = gnomonic(pts)
    try:
        poly = convex_hull(pts)
    except DegenerateHullError as exc:
        print(f"degenerate point cloud: {exc}")
        return EXIT_FAIL
    d = poly.dim
    stream = SeededStream(args.seed)
    ok = euler_holds(poly.f, d)
    print(f"points        {len(pts)}")
    print(f"dimension     {d}")
    print(f"f-vector      {tuple(poly.f)}")
    print(f"euler         {_status(ok)}")
    print(f"volume        {volume(poly):.10g}")
    if d >= 2:
        print(f"surface area  {surface_area(poly):.10g}")
    for s in range(d + 1):
        est = intrinsic_volume(poly, s, args.directions, stream.substream(s))
        se = f" +- {est.std_error:.3g}" if est.method != "exact" else ""
        print(f"V_{s}           {est.value:.10g}{se}  ({est.method})")
    if sph is not None:
        sv = spherical_volume(sph, stream=stream.substream(99))
        print(f"spherical vol {sv.value:.10g}  ({sv.method})")
    if args.off:
        try:
            write_off(poly, args.off)
        except ValueError as exc:
            parser.error(str(exc))
        print(f"wrote {args.off}")
    return EXIT_OK if ok else EXIT_FAIL


# --- lemma-check ------------------------------------------------------------


def _check_tail(args) -> bool:
    gammas = args.gamma or [1.0, 1.5, 2.3]
    hs = [1.0, 10.0, 50.0, 100.0, 500.0]
    all_ok = True
    for g in gammas:
        if not g > 0.5:
            raise ValueError(f"gamma must exceed 1/2, got {g}")
        print(f"gamma = {g:g}")
        print(f"  {'h':>6}  {'tail':>14}  {'tail*h^(2g-1)':>14}  {'factor':>12}  {'1+1/h^2':>12}  bracket")
        ratios = {}
        for h in hs:
            t = tail_integral(h, g)
            ratios[h] = t * h ** (2 * g - 1)
            fac = tail_series_factor(h, g)
            hi = 1.0 + 1.0 / (h * h)
            ok = 1.0 - 1e-12 <= fac <= hi + 1e-12
            all_ok &= ok
            print(f"  {h:6g}  {t:14.6e}  {ratios[h]:14.8f}  {fac:12.9f}  {hi:12.9f}  {_status(ok)}")
        drift = abs(ratios[500.0] / ratios[50.0] - 1.0)
        ok = drift < 0.02
        all_ok &= ok
        print(f"  ratio drift h=50 -> 500: {drift:.3e} (< 2%)  {_status(ok)}")
    return all_ok


def _check_halfspace(args) -> bool:
    ds = [args.d] if args.d else [2, 3]
    betas = [args.beta] if args.beta else [2.0, 2.5, 4.0]
    radii = [0.0, 1.0, 5.0, 20.0]
    m = args.samples
    all_ok = True
    print(f"{'d':>2} {'beta':>5} {'r':>5}  {'exact':>12}  {'mc':>12}  {'z':>7}")
    for d in ds:
        for beta in betas:
            p = BetaPrimeParams(d, beta)
            stream = SeededStream(args.seed, d, (int(round(beta * 1000)),))
            rng = stream.substream(0).generator()
            u = rng.standard_normal(d)
            u /= np.linalg.norm(u)
            proj = sample_beta_prime(p, stream.substream(1), m) @ u
            for r in radii:
                exact = halfspace_probability(p, r)
                freq = float(np.mean(proj >= r))
                se = math.sqrt(max(exact * (1 - exact), 1e-300) / m)
                z = (freq - exact) / se
                ok = abs(z) <= 3.0
                all_ok &= ok
                print(f"{d:2d} {beta:5g} {r:5g}  {exact:12.6e}  {freq:12.6e}  {z:7.2f}  {_status(ok)}")
    return all_ok


def _check_pushforward(args) -> bool:
    if args.d and args.alpha is not None:
        cells = [(args.d, args.alpha)]
    else:
        cells = [(2, 0.0), (2, 1.0), (3, 0.0)]
    m = args.samples
    all_ok = True
    print(f"{'d':>2} {'alpha':>6}  {'p(x1)':>8}  {'p(|x|)':>8}")
    for d, alpha in cells:
        sp = SphericalParams(d, alpha)
        stream = SeededStream(args.seed, d, (int(round((alpha + 1) * 1000)),))
        a = gnomonic(sample_hemisphere_direct(sp, stream.substream(0), m))
        b = sample_beta_prime(sp.to_beta_prime(), stream.substream(1), m)
        p1 = stats.ks_2samp(a[:, 0], b[:, 0]).pvalue
        p2 = stats.ks_2samp(np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)).pvalue
        ok = p1 > 0.01 and p2 > 0.01
        all_ok &= ok
        print(f"{d:2d} {alpha:6g}  {p1:8.4f}  {p2:8.4f}  {_status(ok)}")
    return all_ok


def cmd_lemma_check(args, parser) -> int:
    checks = {"tail": _check_tail, "halfspace": _check_halfspace, "pushforward": _check_pushforward}
    try:
        ok = checks[args.which](args)
    except ValueError as exc:
        parser.error(str(exc))
    print(f"overall: {_status(ok)}")
    return EXIT_OK if ok else EXIT_FAIL


# --- construction-check -----------------------------------------------------


def load_calibration() -> dict:
    text = resources.files("betaprime").joinpath("data/calibration.json").read_text()
    return json.loads(text)


def _matching_fixture(params: cn.ConstructionParams, s: int) -> dict | None:
    for fx in load_calibration().values():
        same = (
            fx["d"] == params.model.d
            and math.isclose(fx["beta"], params.model.beta)
            and fx["s"] == s
            and all(math.isclose(fx[c], getattr(params, c), rel_tol=1e-12) for c in ("c1", "c2", "c3"))
        )
        if same:
            return fx
    return None


def construction_verdicts(params: cn.ConstructionParams, s: int, diag: dict) -> list[tuple[str, str, str]]:
    """(name, value, PASS|FAIL|SKIP) rows for the construction diagnostics."""
    rows = []
    fd = diag["facet_distance_closed_form"]
    err = max(abs(x - fd) / fd for x in diag["facet_distance_numeric"])
    rows.append(("facet distance (closed form vs numeric)", f"{fd:.12g} rel.err {err:.1e}", _status(err <= 1e-10)))
    for key, count in diag["membership"].items():
        if key != "num_samples":
            rows.append((f"membership: {key}", f"{count} violations", _status(count == 0)))
    fx = _matching_fixture(params, s)

    def bracket(name, values):
        shown = ", ".join(f"{v:.4g}" for v in values)
        if fx is None:
            return (name, shown, "SKIP")
        lo, hi = fx["brackets"][name]
        return (f"{name} in [{lo:.4g}, {hi:.4g}]", shown, _status(all(lo <= v <= hi for v in values)))

    rows.append(bracket("n_p_delta", diag["n_p_delta"]))
    rows.append(bracket("p_A_factorized", [diag["p_A_factorized"]]))
    rows.append(bracket("var_ratio", [diag["var_ratio"]]))
    rows.append(bracket("frac_R1", [diag["frac_R1"]]))
    rows.append(bracket("frac_R2", [diag["frac_R2"]]))
    return rows


def cmd_construction_check(args, parser) -> int:
    try:
        model = BetaPrimeParams(args.d, args.beta)
        params = cn.ConstructionParams(model, args.n, args.c1, args.c2, args.c3)
    except ValueError as exc:
        parser.error(str(exc))
    s = args.d if args.s is None else args.s
    if not 1 <= s <= args.d:
        parser.error(f"--s must lie in 1..{args.d}")
    if args.reps < 1:
        parser.error("--reps must be positive")
    try:
        cons = cn.build(params)
    except cn.ConstructionError as exc:
        print(f"construction failed: {exc}")
        return EXIT_FAIL
    diag = cn.construction_diagnostics(params, s, SeededStream(args.seed), reps=args.reps)
    summary = {k: v for k, v in cons.to_dict().items() if k not in ("delta_j", "H")}
    print(dumps17(summary))
    rows = construction_verdicts(params, s, diag)
    print()
    print(f"P(A) direct: {diag['p_A_direct']:.3g} over {args.reps} replications, 95% CI {diag['p_A_direct_ci']}")
    print(f"P(A) factorized: {diag['p_A_factorized']:.4g} +- {diag['p_A_factorized_se']:.2g}")
    print(f"Var V~_{s} / r^{2 * s}: {diag['var_ratio']:.4g} +- {diag['var_ratio_se']:.2g}")
    width = max(len(r[0]) for r in rows)
    for name, value, st in rows:
        print(f"{name:<{width}}  {st:<4}  {value}")
    if args.json:
        Path(args.json).write_text(dumps17({"construction": cons.to_dict(), "diagnostics": diag}) + "\n")
        print(f"wrote {args.json}")
    failed = any(st == "FAIL" for _, _, st in rows)
    print(f"overall: {_status(not failed)}")
    return EXIT_FAIL if failed else EXIT_OK


# --- variance-scan / spherical-scan ----------------------------------------


def plot_scan(result: ExperimentResult, path: Path) -> None:
    """Log-log SVG of variance against n with error bars and the reference slope."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = SVG_SALT
    est = result.estimates
    ns = np.array([e.n for e in est], dtype=float)
    var = np.array([e.variance for e in est])
    se = np.array([e.variance_std_error for e in est])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(ns, var, yerr=se, fmt="o", capsize=3, label="sample variance")
    pos = var > 0
    if pos.any():
        anchor = math.exp(float(np.mean(np.log(var[pos]) - result.config.reference_exponent * np.log(ns[pos]))))
        ax.plot(ns, anchor * ns**result.config.reference_exponent, "--", label=f"n^{result.config.reference_exponent:.3g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("variance")
    ax.set_title(result.config.functional.label)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _toml_message(exc: Exception, path: str) -> str:
    # tomllib reports errors at end of file without a position; add it
    msg = str(exc)
    if "(at end of document)" in msg:
        lines = Path(path).read_text().splitlines() or [""]
        msg = msg.replace("end of document", f"line {len(lines)}, column {len(lines[-1]) + 1}")
    return msg


def _run_scan(args, parser, spherical: bool) -> int:
    try:
        cfg = ExperimentConfig.from_toml(args.config)
    except tomllib.TOMLDecodeError as exc:
        print(f"error: {args.config}: {_toml_message(exc, args.config)}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ConfigError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if spherical and (cfg.model.kind != "hemisphere" or cfg.functional.kind not in ("spherical_volume", "weighted_volume")):
        print("error: spherical-scan needs model.kind = hemisphere and a spherical/weighted volume functional", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        parser.error("--threads must be positive")
    out = args.out or cfg.output_path
    if out is None:
        print("error: no output_path in the config and no --out given", file=sys.stderr)
        return EXIT_USAGE
    for note in cfg.moment_warnings:
        print(f"warning: {note}")
    result = run_experiment(cfg, workers=args.threads)
    paths = write_outputs(result, out)
    print(f"{'n':>6}  {'mean':>14}  {'variance':>14}  {'jackknife se':>14}")
    for e in result.estimates:
        print(f"{e.n:6d}  {e.mean:14.6g}  {e.variance:14.6g}  {e.variance_std_error:14.4g}")
    for note in result.notes:
        if note not in cfg.moment_warnings:
            print(f"note: {note}")
    if args.plot:
        svg = Path(out) / "variance.svg"
        plot_scan(result, svg)
        paths["plot"] = svg
    for p in paths.values():
        print(f"wrote {p}")
    if result.fit is None:
        print("verdict: unavailable")
        return EXIT_FAIL
    f, v = result.fit, result.verdict
    conj = "conjecture-compatible" if v.conjecture_compatible else "not conjecture-compatible"
    print(
        f"verdict: {v.verdict} (slope {f.fitted_slope:.4f} +- {f.slope_std_error:.4f} "
        f"vs reference {f.exponent_reference:.4f}; {conj})"
    )
    return EXIT_FAIL if v.verdict == "inconsistent" else EXIT_OK


def cmd_variance_scan(args, parser) -> int:
    return _run_scan(args, parser, spherical=False)


def cmd_spherical_scan(args, parser) -> int:
    return _run_scan(args, parser, spherical=True)


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="betaprime", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="write a random point cloud to CSV")
    p.add_argument("--model", choices=("beta_prime", "hemisphere"), required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("hull-stats", help="f-vector, volumes and intrinsic volumes of a CSV point cloud")
    p.add_argument("--input", required=True)
    p.add_argument("--spherical", action="store_true", help="rows are half-sphere points; project gnomonically")
    p.add_argument("--directions", type=int, default=1024, help="Kubota directions for middle intrinsic volumes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--off", help="also write the hull as an OFF file (d = 3)")
    p.set_defaults(func=cmd_hull_stats)

    p = sub.add_parser("lemma-check", help="numeric checks of the tail, half-space and pushforward identities")
    p.add_argument("--which", choices=("tail", "halfspace", "pushforward"), required=True)
    p.add_argument("--gamma", type=float, action="append", help="tail exponent (repeatable)")
    p.add_argument("--d", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_lemma_check)

    p = sub.add_parser("construction-check", help="diagnostics of the distant-simplex construction")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--c1", type=float, default=0.5)
    p.add_argument("--c2", type=float, default=0.5)
    p.add_argument("--c3", type=float, default=None, help="default 1/(2d)")
    p.add_argument("--s", type=int, default=None, help="intrinsic volume index, default d")
    p.add_argument("--reps", type=int, default=1000, help="replications for the direct P(A) fraction")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--json", help="write the full construction dump and diagnostics here")
    p.set_defaults(func=cmd_construction_check)

    for name, fn, helptext in (
        ("variance-scan", cmd_variance_scan, "variance scaling experiment from a TOML config"),
        ("spherical-scan", cmd_spherical_scan, "spherical-volume scaling experiment from a TOML config"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="output directory (overrides output_path)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--plot", action="store_true", help="also write variance.svg")
        p.set_defaults(func=fn)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    return args.func(args, sub)


if __name__ == "__main__":
    sys.exit(main())
