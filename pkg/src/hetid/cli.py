"""Command-line front end.

Five subcommands tie the pipeline together:

  oracle    closed-form identification for a registered analytic model
  simulate  draw a sample CSV from a registered model
  estimate  plug-in pipeline on a sample CSV (field, root, slope, h-hat)
  verify    integrator cross-checks + randomized inequality suite
  mc        Monte Carlo convergence study

Every subcommand accepts `--config FILE` (flat dotted-key text) and
repeatable `--set key=value` overrides; the listed flags are one-to-one
shorthands for config keys.  Exit codes: 0 ok, 2 config/model error,
3 identification failure, 4 numerical failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import configio
from .configio import RunConfig, load_config, resolve_out_dir
from .errors import (EXIT_NUMERICAL, EXIT_OK, ConfigError, HetidError,
                     exit_code_for)
from .estimate import (KernelConfig, MonteCarloPlan, diagnostic_from_samples,
                       estimate_lambda, plugin_reconstruct, run_monte_carlo,
                       trimmed_ygrid)
from .lamfield import (coefficients_AB, find_y0, integrate_lambda,
                       oracle_partials)
from .models import make_model, simulate, uniform_weight
from .reconstruct import ConstraintSet, reconstruct_global
from .verify import full_verification

# flag name -> config key, per subcommand (besides --config/--set)
FLAG_KEYS = {
    "oracle": {"model": "model", "error": "error", "seed": "seed",
               "out": "out", "points": "grid.points",
               "half_range": "grid.half_range"},
    "simulate": {"model": "model", "error": "error", "seed": "seed",
                 "out": "out", "n": "simulate.n"},
    "estimate": {"input": "input", "seed": "seed", "out": "out",
                 "bandwidth_x": "estimate.bandwidth_x",
                 "bandwidth_y": "estimate.bandwidth_y"},
    "verify": {"out": "out", "instances": "verify.instances",
               "models": "verify.models", "seed": "verify.seed"},
    "mc": {"out": "out", "model": "mc.model", "sizes": "mc.sizes",
           "replications": "mc.replications", "seed_base": "mc.seed_base"},
}


def _weight_from(cfg: RunConfig, d: int):
    return uniform_weight(cfg["weight.lo"], cfg["weight.hi"], d=d,
                          index=cfg["weight.index"])


def _constraints_from(cfg: RunConfig) -> ConstraintSet:
    kind = cfg["constraints.kind"]
    if kind == "canonical":
        return ConstraintSet.canonical(cfg["constraints.y1"],
                                       cfg["constraints.alpha"])
    need = {"two-point": ("ya", "yb", "alpha_a", "alpha_b"),
            "point-plus-slope": ("ya", "alpha_a", "slope")}.get(kind)
    if need is None:
        raise ConfigError(f"unknown constraints.kind '{kind}'")
    vals = {}
    for name in need:
        v = cfg[f"constraints.{name}"]
        if v is None:
            raise ConfigError(f"constraints.kind = {kind} requires "
                              f"constraints.{name}")
        vals[name] = v
    if kind == "two-point":
        return ConstraintSet.two_point(vals["ya"], vals["yb"],
                                       vals["alpha_a"], vals["alpha_b"])
    return ConstraintSet.point_slope(vals["ya"], vals["alpha_a"],
                                     vals["slope"])


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _run_oracle(cfg: RunConfig, out) -> int:
    model = make_model(cfg["model"], cfg["error"])
    weight = _weight_from(cfg, model.d_x)
    tol = cfg["quadrature.tol"]
    pair = coefficients_AB(model, weight, tol=tol)
    partials = oracle_partials(model, weight.index)

    def lam(ys):
        return integrate_lambda(partials, weight, ys, tol=tol)

    glo, ghi = cfg["grid.lo"], cfg["grid.hi"]
    scan_lo = glo if glo is not None else -3.0
    scan_hi = ghi if ghi is not None else 3.0
    y0 = find_y0(lam, scan_lo, scan_hi)
    if glo is None or ghi is None:
        half = cfg["grid.half_range"]
        glo, ghi = y0 - half, y0 + half
    grid = np.linspace(glo, ghi, cfg["grid.points"])

    constraints = _constraints_from(cfg)
    lam_grid = np.asarray(lam(grid), dtype=float)
    rt = reconstruct_global(lam, pair.A, pair.B, constraints, grid, y0=y0,
                            exc_frac=cfg["reconstruction.excision"],
                            tol=cfg["reconstruction.tol"],
                            lam_values=lam_grid)

    configio.write_reconstruction_csv(out / "reconstruction.csv", rt)
    configio.write_sidecar(out / "reconstruction_meta.txt", {
        "A": rt.A, "B": rt.B, "y0": rt.y0, "alpha2": rt.alpha2,
        "constraints.kind": constraints.kind,
        "constraints.y1": constraints.y1, "constraints.alpha": constraints.alpha,
        "constraints.ya": constraints.ya, "constraints.yb": constraints.yb,
        "constraints.alpha_a": constraints.alpha_a,
        "constraints.alpha_b": constraints.alpha_b,
        "constraints.slope": constraints.slope,
        "excision": rt.delta_exc, "tol.quadrature": tol,
        "tol.reconstruction": cfg["reconstruction.tol"],
    })
    configio.write_lambda_csv(out / "lambda.csv", grid, lam_grid)
    configio.write_sidecar(out / "lambda_meta.txt", {
        "A": pair.A, "B": pair.B, "y0": y0, "tol.quadrature": tol})
    configio.write_plot_data_csv(out / "plot_data.csv", grid, rt.values,
                                 lam_grid, rt.residuals)
    worst = float(np.nanmax(np.abs(rt.residuals)))
    print(f"oracle {model.name}: A={pair.A:.6g} B={pair.B:.6g} "
          f"y0={y0:.6g} alpha2={rt.alpha2:.6g} max|residual|={worst:.3g}")
    return EXIT_OK


def _run_simulate(cfg: RunConfig, out) -> int:
    model = make_model(cfg["model"], cfg["error"])
    samples = simulate(model, cfg["simulate.n"], cfg["seed"])
    configio.write_sample_csv(out / "sample.csv", samples)
    print(f"simulate {model.name}: n={samples.n} d_x={samples.d_x} "
          f"seed={cfg['seed']} -> {out / 'sample.csv'}")
    return EXIT_OK


def _kernel_config_from(cfg: RunConfig, samples) -> KernelConfig:
    trim = (cfg["estimate.trim_lo"], cfg["estimate.trim_hi"])
    bx, by = cfg["estimate.bandwidth_x"], cfg["estimate.bandwidth_y"]
    if bx is None or by is None:
        auto = KernelConfig.rule_of_thumb(samples, cx=cfg["estimate.cx"],
                                          cy=cfg["estimate.cy"])
        bx_t = (bx,) * samples.d_x if bx is not None else auto.bandwidth_x
        by_v = by if by is not None else auto.bandwidth_y
        return KernelConfig(bandwidth_x=bx_t, bandwidth_y=by_v, trim=trim)
    return KernelConfig(bandwidth_x=(bx,) * samples.d_x, bandwidth_y=by,
                        trim=trim)


def _run_estimate(cfg: RunConfig, out) -> int:
    if not cfg["input"]:
        raise ConfigError("estimate mode needs input = <sample csv path>")
    samples = configio.read_sample_csv(cfg["input"])
    kc = _kernel_config_from(cfg, samples)
    weight = _weight_from(cfg, samples.d_x)

    ygrid = trimmed_ygrid(samples, kc, cfg["estimate.grid_points"])
    fld = estimate_lambda(samples, kc, weight, ygrid,
                          gl_nodes=cfg["estimate.gl_nodes"])
    rt = plugin_reconstruct(samples, kc, weight, field_override=fld,
                            gl_nodes=cfg["estimate.gl_nodes"])

    configio.write_lambda_csv(out / "lambda_hat.csv", fld.grid, fld.values)
    configio.write_sidecar(out / "lambda_hat_meta.txt", {
        "A": 0.0, "B": fld.coeffs.B, "y0": fld.y0,
        "bandwidth_x": ",".join(configio._fmt(b) for b in kc.bx),
        "bandwidth_y": kc.bandwidth_y, "ess_min": fld.meta["ess_min"],
        "n": samples.n,
    })
    configio.write_reconstruction_csv(out / "reconstruction.csv", rt)
    configio.write_sidecar(out / "reconstruction_meta.txt", {
        "A": rt.A, "B": rt.B, "y0": rt.y0, "alpha2": rt.alpha2,
        "repair_rate": rt.meta["repair_rate"],
        "quality_warning": rt.meta["quality_warning"],
        "excision": rt.delta_exc,
    })
    configio.write_plot_data_csv(out / "plot_data.csv", rt.grid, rt.values,
                                 fld.lam(rt.grid), rt.residuals)
    lines = [f"n = {samples.n}", f"y0_hat = {fld.y0!r}",
             f"B_hat = {fld.coeffs.B!r}",
             f"repair_rate = {rt.meta['repair_rate']!r}"]
    if cfg["estimate.diagnostic"]:
        verdict, _ = diagnostic_from_samples(samples, kc, weight)
        lines.append(f"scale_diagnostic = {verdict}")
    configio.atomic_write_text(out / "diagnostics.txt", "\n".join(lines) + "\n")
    print(f"estimate: n={samples.n} y0_hat={fld.y0:.4g} "
          f"B_hat={fld.coeffs.B:.4g} repair_rate={rt.meta['repair_rate']:.3f}")
    return EXIT_OK


def _run_verify(cfg: RunConfig, out) -> int:
    report = full_verification(models=cfg["verify.models"],
                               gronwall_instances=cfg["verify.instances"],
                               seed=cfg["verify.seed"],
                               progress=lambda msg: print(f"  {msg}"))
    g = report["gronwall"]
    lines = [
        "integral-inequality suite",
        f"  instances = {g['instances']}",
        f"  holds = {g['counts']['hypothesis-holds-and-conclusion-holds']}",
        f"  hypothesis-fails = {g['counts']['hypothesis-fails']}",
        f"  conclusion-violated = {g['counts']['conclusion-violated']}",
        f"  violating-indices = {g['violating_indices']}",
        f"  worst-conclusion-margin = {g['worst_conclusion_margin']:.6e}",
        f"  seed = {g['seed']}",
        "",
        "closed-form vs one-step integrator",
    ]
    for name, chk in report["crosschecks"].items():
        lines += [
            f"  model {name}: sup-gap = {chk['sup_gap']:.6e} over "
            f"{chk['solid_points']} points (tolerance {report['gap_tolerance']:g})",
            f"    A = {chk['A']!r}  B = {chk['B']!r}  y0 = {chk['y0']!r}",
            f"    uniqueness max deviation = "
            f"{chk['uniqueness']['max_deviation']:.6e} "
            f"(consistent = {chk['uniqueness']['consistent']})",
        ]
    lines += ["", f"overall = {'PASS' if report['overall_pass'] else 'FAIL'}"]
    configio.atomic_write_text(out / "verify_report.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if report["overall_pass"] else EXIT_NUMERICAL


def _run_mc(cfg: RunConfig, out) -> int:
    plan = MonteCarloPlan(
        model=cfg["mc.model"], sizes=tuple(cfg["mc.sizes"]),
        replications=cfg["mc.replications"], seed_base=cfg["mc.seed_base"],
        eval_lo=cfg["mc.eval_lo"], eval_hi=cfg["mc.eval_hi"],
        eval_points=cfg["mc.eval_points"], metric=cfg["mc.metric"],
        central_halfwidth=cfg["mc.central_halfwidth"])
    res = run_monte_carlo(plan)
    configio.write_mc_results_csv(out / "mc_results.csv", res["rows"])
    configio.write_mc_summary_csv(out / "mc_summary.csv", res["summary"])
    for model, n, median, iqr, fails in res["summary"]:
        print(f"mc {model} n={n}: median={median:.6g} iqr={iqr:.6g} "
              f"fails={fails}")
    if res["invalid_cells"]:
        print(f"invalid cells: {res['invalid_cells']}")
    return EXIT_OK


RUNNERS = {"oracle": _run_oracle, "simulate": _run_simulate,
           "estimate": _run_estimate, "verify": _run_verify, "mc": _run_mc}


def run(cfg: RunConfig) -> int:
    """Execute one configured run; artifacts land in the resolved output
    directory along with a reproducibility manifest."""
    out = resolve_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    code = RUNNERS[cfg.mode](cfg, out)
    configio.write_manifest(out / "manifest.txt", cfg)
    return code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetid",
        description="Constructive identification of heteroscedastic "
                    "transformation models")
    sub = parser.add_subparsers(dest="mode", required=True)

    def common(p):
        p.add_argument("--config", help="flat dotted-key config file")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config key (repeatable)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("oracle", help="closed-form identification of a "
                                      "registered model")
    common(p)
    p.add_argument("--model", help="registered model name (M1..M4)")
    p.add_argument("--error", help="error law (normal, logistic)")
    p.add_argument("--seed", type=int)
    p.add_argument("--points", type=int, help="reconstruction grid points")
    p.add_argument("--half-range", dest="half_range", type=float,
                   help="grid half-width around the root")

    p = sub.add_parser("simulate", help="draw a sample CSV from a model")
    common(p)
    p.add_argument("--model")
    p.add_argument("--error")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="sample size")

    p = sub.add_parser("estimate", help="plug-in pipeline on a sample CSV")
    common(p)
    p.add_argument("--input", help="sample CSV path (header y,x1,...,xd)")
    p.add_argument("--seed", type=int)
    p.add_argument("--bandwidth-x", dest="bandwidth_x", type=float,
                   help="covariate bandwidth (all coordinates)")
    p.add_argument("--bandwidth-y", dest="bandwidth_y", type=float,
                   help="response bandwidth")

    p = sub.add_parser("verify", help="integrator cross-checks and the "
                                      "randomized inequality suite")
    common(p)
    p.add_argument("--instances", type=int,
                   help="randomized inequality instances")
    p.add_argument("--models", help="comma-separated model names")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("mc", help="Monte Carlo convergence study")
    common(p)
    p.add_argument("--model", help="model for the study")
    p.add_argument("--sizes", help="comma-separated sample sizes")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed-base", dest="seed_base", type=int)

    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.mode, path=args.config, overrides=args.set)
    values = dict(cfg.values)
    for flag, key in FLAG_KEYS[args.mode].items():
        flag_val = getattr(args, flag, None)
        if flag_val is None:
            continue
        _, caster = configio.SCHEMA[key]
        values[key] = caster(str(flag_val))
    return RunConfig(mode=args.mode, values=values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except HetidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
